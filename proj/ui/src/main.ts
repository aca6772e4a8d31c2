// Page wiring: sockets, sliders, presets, drawing and export.

import { Panel, SocketLike } from "./panel.js";
import { CONTROLLERS, ControllerName, StateMessage } from "./protocol.js";
import { forceBars, handSegments, mean, preset, Trace } from "./view.js";

const params = new URLSearchParams(location.search);
// served by `biohand serve --ui` the socket shares the page's host and port
const url = params.get("ws") ?? `ws://${location.host || "127.0.0.1:8765"}/teleop`;

const panel = new Panel({ connect: () => new WebSocket(url) as unknown as SocketLike });
const ksTrace = new Trace();
const vTrace = new Trace();

const $ = <T extends HTMLElement>(id: string) => document.getElementById(id) as T;
const status = $("status");
const sliderBox = $("sliders");
const hand = $<HTMLCanvasElement>("hand");
const bars = $<HTMLCanvasElement>("bars");
const traces = $<HTMLCanvasElement>("traces");
const controllerSel = $<HTMLSelectElement>("controller");
const info = $("info");

let inputs: HTMLInputElement[] = [];

function buildSliders(): void {
  sliderBox.replaceChildren();
  inputs = panel.sliders!.map((v, i) => {
    const row = document.createElement("label");
    row.className = "slider";
    const name = document.createElement("span");
    name.textContent = `q_${i}`;
    const input = document.createElement("input");
    input.type = "range";
    input.min = String(panel.lo[i]);
    input.max = String(panel.hi[i]);
    input.step = "any";
    input.value = String(v);
    input.addEventListener("input", () => panel.setSlider(i, Number(input.value)));
    row.append(name, input);
    sliderBox.append(row);
    return input;
  });
}

function syncSliders(): void {
  panel.sliders!.forEach((v, i) => (inputs[i].value = String(v)));
}

for (const c of CONTROLLERS) controllerSel.add(new Option(c, c));
controllerSel.addEventListener("change", () => panel.selectController(controllerSel.value as ControllerName));
$("reset").addEventListener("click", () => {
  panel.requestReset();
  ksTrace.clear();
  vTrace.clear();
});
for (const name of ["rest", "open", "close"] as const)
  $(`preset-${name}`).addEventListener("click", () => {
    if (!panel.sliders) return;
    panel.setAll(preset(name, panel.lo, panel.hi));
    syncSliders();
  });
$("export").addEventListener("click", () => {
  const csv = panel.exportCsv();
  if (!csv) return;
  const a = document.createElement("a");
  a.href = URL.createObjectURL(new Blob([csv], { type: "text/csv" }));
  a.download = "teleop_trajectory.csv";
  a.click();
  URL.revokeObjectURL(a.href);
});

function drawHand(m: StateMessage): void {
  const g = hand.getContext("2d")!;
  g.clearRect(0, 0, hand.width, hand.height);
  g.lineWidth = 4;
  g.lineCap = "round";
  const touching = new Set(m.contacts.map((c) => c.fingertip));
  for (const s of handSegments(m, 1400, [hand.width / 2, hand.height * 0.8])) {
    g.strokeStyle = touching.has(s.tip) ? "#c0392b" : "#34495e";
    g.beginPath();
    g.moveTo(...s.from);
    g.lineTo(...s.to);
    g.stroke();
  }
}

function drawBars(m: StateMessage): void {
  const g = bars.getContext("2d")!;
  g.clearRect(0, 0, bars.width, bars.height);
  const f = forceBars(m);
  const top = Math.max(1, m.aggregates.max_force);
  const w = bars.width / Math.max(1, f.length);
  f.forEach((b, i) => {
    const h = (b.force / top) * (bars.height - 16);
    g.fillStyle = "#2980b9";
    g.fillRect(i * w + 6, bars.height - 14 - h, w - 12, h);
    g.fillStyle = "#333";
    g.fillText(b.tip, i * w + 6, bars.height - 2);
  });
}

function drawTraces(): void {
  const g = traces.getContext("2d")!;
  g.clearRect(0, 0, traces.width, traces.height);
  const half = traces.height / 2;
  const plot = (tr: Trace, y0: number, colour: string, label: string) => {
    g.strokeStyle = colour;
    g.beginPath();
    tr.polyline(traces.width, half - 14).forEach(([x, y], i) => (i ? g.lineTo(x, y0 + y) : g.moveTo(x, y0 + y)));
    g.stroke();
    g.fillStyle = colour;
    g.fillText(label, 4, y0 + 10);
  };
  plot(ksTrace, 0, "#8e44ad", "mean Ks");
  plot(vTrace, half, "#16a085", "mean v");
}

// Rendering reads the latest snapshot; frames that arrive faster are skipped.
let drawn: StateMessage | null = null;
function frame(): void {
  status.textContent = panel.status;
  status.className = panel.status;
  const m = panel.latest;
  if (m && m !== drawn) {
    if (inputs.length !== m.q_d.length) buildSliders();
    if (!drawn) controllerSel.value = m.controller;
    if (drawn && m.t < drawn.t) ksTrace.clear(), vTrace.clear();  // server restarted
    ksTrace.push(m.t, mean(m.profiles.ks));
    vTrace.push(m.t, mean(m.profiles.v));
    drawHand(m);
    drawBars(m);
    drawTraces();
    info.textContent =
      `t ${m.t.toFixed(2)} s  ${m.controller}  max ${m.aggregates.max_force.toFixed(3)} N  ` +
      `mean ${m.aggregates.mean_force.toFixed(3)} N  sent ${panel.sent}  recorded ${panel.recording.length}` +
      (panel.lastError ? `  error: ${panel.lastError}` : "");
    drawn = m;
  }
  requestAnimationFrame(frame);
}

setInterval(() => panel.flush(), panel.controlPeriodMs);
panel.start();
requestAnimationFrame(frame);
