/**
 * Perceptually uniform colormap for the scalar color channel.
 *
 * 16 anchors of the familiar dark-purple-to-yellow ramp, linearly
 * interpolated into a 256-entry lookup table. Byte 0 maps to the first
 * anchor and byte 255 to the last, exactly.
 */

const ANCHORS: Array<[number, number, number]> = [
  [68, 1, 84],
  [72, 26, 108],
  [71, 47, 125],
  [65, 68, 135],
  [57, 86, 140],
  [49, 104, 142],
  [42, 120, 142],
  [35, 136, 142],
  [31, 152, 139],
  [34, 168, 132],
  [53, 183, 121],
  [84, 197, 104],
  [122, 209, 81],
  [165, 219, 54],
  [210, 226, 27],
  [253, 231, 37],
];

function buildLut(): Uint8Array {
  const lut = new Uint8Array(256 * 3);
  const segments = ANCHORS.length - 1;
  for (let i = 0; i < 256; i++) {
    const t = (i / 255) * segments;
    const s = Math.min(Math.floor(t), segments - 1);
    const f = t - s;
    for (let c = 0; c < 3; c++) {
      lut[i * 3 + c] = Math.round(ANCHORS[s][c] * (1 - f) + ANCHORS[s + 1][c] * f);
    }
  }
  return lut;
}

export const COLOR_LUT = buildLut();

/** CSS color string for a channel byte. */
export function colorOf(byte: number): string {
  const i = (byte & 0xff) * 3;
  return `rgb(${COLOR_LUT[i]},${COLOR_LUT[i + 1]},${COLOR_LUT[i + 2]})`;
}
