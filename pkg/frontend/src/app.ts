// Cockpit wiring: drive view (speedometer, limit sign, badges, pedals, lever)
// and learning view (profile chart, IR bars, apply/reset controls).

import { assembleSeries, drawIrBars, drawProfileChart } from "./chart.js";
import { adaptSocket, CockpitClient } from "./client.js";
import { KeyboardPedals } from "./input.js";
import { canApplyLearning, learnedDeviation, speedKmh } from "./state.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function fmt(x: number, digits = 0): string {
  return x.toFixed(digits);
}

export function startApp(baseUrl: string = location.origin): void {
  const client = new CockpitClient(baseUrl, (url) => adaptSocket(new WebSocket(url)));
  const pedals = new KeyboardPedals();

  const speedEl = el<HTMLDivElement>("speed");
  const targetEl = el<HTMLDivElement>("target");
  const limitEl = el<HTMLDivElement>("limit-sign");
  const offsetEl = el<HTMLDivElement>("offset");
  const pldfBadge = el<HTMLSpanElement>("badge-pldf");
  const intervBadge = el<HTMLSpanElement>("badge-intervening");
  const learnedBadge = el<HTMLSpanElement>("badge-learned");
  const statusEl = el<HTMLDivElement>("status");
  const errorEl = el<HTMLDivElement>("error");
  const routeSel = el<HTMLSelectElement>("route-select");
  const gasBar = el<HTMLDivElement>("gas-bar");
  const brakeBar = el<HTMLDivElement>("brake-bar");
  const chartCanvas = el<HTMLCanvasElement>("profile-chart");
  const irCanvas = el<HTMLCanvasElement>("ir-bars");
  const applyBtn = el<HTMLButtonElement>("btn-apply");
  const startBtn = el<HTMLButtonElement>("btn-start");
  const abortBtn = el<HTMLButtonElement>("btn-abort");

  const sessionKey = "adaptive-pldf-session";
  client.connect(sessionStorage.getItem(sessionKey) ?? undefined);

  client.onChange((state, msg) => {
    if (msg?.type === "ack" && msg.cmd === "connect" && msg.session) {
      sessionStorage.setItem(sessionKey, msg.session);
    }
    const tick = state.tick;
    speedEl.textContent = fmt(speedKmh(state));
    targetEl.textContent = tick ? `target ${fmt(tick.target_kmh)} km/h` : "target -";
    limitEl.textContent = tick ? fmt(tick.limit_kmh) : "-";
    offsetEl.textContent =
      tick && tick.offset_kmh !== 0
        ? `${tick.offset_kmh > 0 ? "+" : ""}${fmt(tick.offset_kmh)} km/h`
        : "";
    pldfBadge.classList.toggle("on", tick?.pldf_active ?? false);
    pldfBadge.textContent = tick?.pldf_active ? "PLDF active" : "PLDF off";
    intervBadge.classList.toggle("on", tick?.intervening ?? false);
    learnedBadge.classList.toggle("on", learnedDeviation(tick));
    learnedBadge.title =
      "the function holds a learned speed that differs from the posted limit";
    statusEl.textContent = state.lapRunning
      ? `lap ${state.lapId ?? "?"}  d=${fmt(tick?.d_m ?? 0)} m`
      : `connected (iteration ${state.iteration})`;
    if (state.lastError) {
      errorEl.textContent = `${state.lastError.code}: ${state.lastError.text}`;
      errorEl.classList.add("visible");
      setTimeout(() => errorEl.classList.remove("visible"), 4000);
    }
    applyBtn.disabled = !canApplyLearning(state);
    startBtn.disabled = state.lapRunning || state.routeName === null;
    abortBtn.disabled = !state.lapRunning;

    if (msg === null || msg.type === "profile" || msg.type === "lap_done") {
      const ctx2d = chartCanvas.getContext("2d");
      if (ctx2d) {
        drawProfileChart(ctx2d, assembleSeries(state.profiles), chartCanvas.width, chartCanvas.height);
      }
      const irCtx = irCanvas.getContext("2d");
      if (irCtx) drawIrBars(irCtx, state.ratesHistory, irCanvas.width, irCanvas.height);
    }
  });

  client
    .fetchRoutes()
    .then((routes) => {
      routeSel.innerHTML = "";
      for (const r of routes) {
        const opt = document.createElement("option");
        opt.value = r.name;
        opt.textContent = `${r.name} (${fmt(r.length_m / 1000, 1)} km)`;
        routeSel.appendChild(opt);
      }
    })
    .catch(() => {
      errorEl.textContent = "route list unavailable";
      errorEl.classList.add("visible");
    });

  el<HTMLButtonElement>("btn-load").onclick = () =>
    client.send({ kind: "load_route", name: routeSel.value });
  startBtn.onclick = () => client.send({ kind: "start_lap" });
  abortBtn.onclick = () => client.send({ kind: "abort_lap" });
  el<HTMLButtonElement>("btn-react").onclick = () => client.send({ kind: "reactivate" });
  el<HTMLButtonElement>("btn-up").onclick = () => client.send({ kind: "lever", deltaKmh: 5 });
  el<HTMLButtonElement>("btn-down").onclick = () => client.send({ kind: "lever", deltaKmh: -5 });
  applyBtn.onclick = () => client.send({ kind: "apply_spaa" });
  el<HTMLButtonElement>("btn-reset").onclick = () => client.send({ kind: "reset_learning" });

  // On-screen pedals mirror the keyboard ramp through pointer events.
  const gasPedal = el<HTMLButtonElement>("pedal-gas");
  const brakePedal = el<HTMLButtonElement>("pedal-brake");
  gasPedal.onpointerdown = () => pedals.gas.press();
  gasPedal.onpointerup = gasPedal.onpointerleave = () => pedals.gas.release();
  brakePedal.onpointerdown = () => pedals.brake.press();
  brakePedal.onpointerup = brakePedal.onpointerleave = () => pedals.brake.release();

  window.addEventListener("keydown", (ev) => {
    if (ev.repeat) return;
    if (pedals.keyDown(ev.code)) ev.preventDefault();
    if (ev.code === "Space") {
      client.send({ kind: "reactivate" });
      ev.preventDefault();
    }
  });
  window.addEventListener("keyup", (ev) => {
    if (pedals.keyUp(ev.code)) ev.preventDefault();
  });

  const frame = (now: number) => {
    const action = pedals.sample(now);
    if (action && client.state.lapRunning) client.send(action);
    if (action && action.kind === "pedals") {
      gasBar.style.width = `${Math.round(action.gas * 100)}%`;
      brakeBar.style.width = `${Math.round(action.brake * 100)}%`;
    }
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}
