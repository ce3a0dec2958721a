/**
 * Browser entry point: wires the canvas, pointer events, and the control
 * widgets to the client, renderer, drag controller, and control panel.
 *
 * Connection URL comes from ?ws=... (default ws://127.0.0.1:7878).
 */

import { EngineClient, wrapWebSocket } from "./client.js";
import { ControlPanel, K_CHOICES, SIGMA_RANGE } from "./controls.js";
import { DragController } from "./drag.js";
import { Renderer } from "./renderer.js";
import { ViewState } from "./view.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function main(): void {
  const canvas = el<HTMLCanvasElement>("scatter");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas context unavailable");

  const view = new ViewState();
  const renderer = new Renderer();
  const url = new URLSearchParams(location.search).get("ws") ?? "ws://127.0.0.1:7878";
  const client = new EngineClient(wrapWebSocket(new WebSocket(url)), view);
  const panel = new ControlPanel(view, (m) => client.send(m));
  const drag = new DragController(view, renderer, (m) => client.send(m), (cb) =>
    requestAnimationFrame(cb),
  );

  let fitted = false;
  let panning = false;
  let lastPointer: [number, number] = [0, 0];

  function resize(): void {
    canvas.width = canvas.clientWidth * devicePixelRatio;
    canvas.height = canvas.clientHeight * devicePixelRatio;
  }
  window.addEventListener("resize", resize);
  resize();

  function pointerPos(ev: PointerEvent): [number, number] {
    const rect = canvas.getBoundingClientRect();
    return [
      (ev.clientX - rect.left) * devicePixelRatio,
      (ev.clientY - rect.top) * devicePixelRatio,
    ];
  }

  canvas.addEventListener("pointerdown", (ev) => {
    const [sx, sy] = pointerPos(ev);
    canvas.setPointerCapture(ev.pointerId);
    if (!drag.pointerDown(sx, sy, canvas.width, canvas.height)) {
      panning = true;
      lastPointer = [sx, sy];
    }
  });
  canvas.addEventListener("pointermove", (ev) => {
    const [sx, sy] = pointerPos(ev);
    if (drag.dragging) {
      drag.pointerMove(sx, sy, canvas.width, canvas.height);
    } else if (panning) {
      view.panBy(sx - lastPointer[0], sy - lastPointer[1]);
      lastPointer = [sx, sy];
    }
  });
  canvas.addEventListener("pointerup", () => {
    drag.pointerUp();
    panning = false;
  });
  canvas.addEventListener("wheel", (ev) => {
    ev.preventDefault();
    view.zoomBy(ev.deltaY < 0 ? 1.15 : 1 / 1.15);
  });

  // control widgets
  const sigma = el<HTMLInputElement>("sigma");
  sigma.min = String(SIGMA_RANGE[0]);
  sigma.max = String(SIGMA_RANGE[1]);
  sigma.step = "0.01";
  sigma.addEventListener("input", () => panel.setSigma(Number(sigma.value)));

  const alpha = el<HTMLInputElement>("alpha");
  alpha.addEventListener("input", () => panel.setAlpha(Number(alpha.value)));

  const kSelect = el<HTMLSelectElement>("k");
  for (const k of K_CHOICES) {
    const opt = document.createElement("option");
    opt.value = String(k);
    opt.textContent = String(k);
    if (k === view.controls.k) opt.selected = true;
    kSelect.appendChild(opt);
  }
  kSelect.addEventListener("change", () => panel.setK(Number(kSelect.value)));

  const mode = el<HTMLSelectElement>("mode");
  mode.addEventListener("change", () => panel.setMode(mode.value as "som" | "graph"));

  const paused = el<HTMLInputElement>("paused");
  paused.addEventListener("change", () => panel.setPaused(paused.checked));

  const colorBy = el<HTMLSelectElement>("colorBy");
  colorBy.addEventListener("change", () => panel.setColorDim(Number(colorBy.value)));

  el<HTMLButtonElement>("addLandmark").addEventListener("click", () => {
    const [wx, wy] = view.screenToWorld(canvas.width / 2, canvas.height / 2, canvas.width, canvas.height);
    panel.addLandmarkAt(wx, wy);
  });
  el<HTMLButtonElement>("duplicateLandmark").addEventListener("click", () => panel.duplicateSelected());
  const removeBtn = el<HTMLButtonElement>("removeLandmark");
  removeBtn.addEventListener("click", () => panel.removeSelected());

  const toasts = el<HTMLDivElement>("toasts");
  let toastsShown = 0;

  function frame(): void {
    if (!fitted && view.points) {
      view.fitCamera(canvas.width, canvas.height);
      fitted = true;
    }
    if (view.datasetInfo && colorBy.childElementCount === 0) {
      view.datasetInfo.names.forEach((name, i) => {
        const opt = document.createElement("option");
        opt.value = String(i);
        opt.textContent = name;
        colorBy.appendChild(opt);
      });
    }
    while (toastsShown < view.toasts.length) {
      const t = view.toasts[toastsShown++];
      const node = document.createElement("div");
      node.className = "toast";
      node.textContent = `${t.code}: ${t.detail}`;
      toasts.appendChild(node);
      setTimeout(() => node.remove(), 6000);
    }
    removeBtn.disabled = view.selectedLandmark === null || !panel.canRemove();
    renderer.render(view, ctx!, canvas.width, canvas.height);
    requestAnimationFrame(frame);
  }
  requestAnimationFrame(frame);
}

main();
