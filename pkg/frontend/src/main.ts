// Browser shell: connects to the service, renders the latest snapshot at the
// display rate, and turns pointer/form interaction into protocol commands.

import { SimClient, Transport } from "./client.js";
import { ConfigValues, ParameterName } from "./protocol.js";
import { renderBeam, renderFeedbackArrow, SceneLayout } from "./render.js";
import { PointerPoint, StylusController, Viewport } from "./stylus.js";
import { deriveBanner, deriveFeedbackGauge, validateParameter } from "./view.js";

function browserTransport(url: string): Promise<Transport> {
  return new Promise((resolve, reject) => {
    const ws = new WebSocket(url);
    ws.onerror = () => reject(new Error(`cannot reach ${url}`));
    ws.onopen = () =>
      resolve({
        send: (text) => ws.send(text),
        close: () => ws.close(),
        onMessage: (cb) => {
          ws.onmessage = (event) => cb(String(event.data));
        },
        onClose: (cb) => {
          ws.onclose = () => cb();
        },
      });
  });
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const PARAMETER_FIELDS: Array<{ name: ParameterName; configKey: keyof ConfigValues }> = [
  { name: "youngs_modulus", configKey: "youngs_modulus_pa" },
  { name: "density", configKey: "density_kgm3" },
  { name: "n_elements", configKey: "n_elements" },
  { name: "length", configKey: "length_m" },
  { name: "width", configKey: "width_m" },
  { name: "thickness", configKey: "thickness_m" },
  { name: "gap", configKey: "gap_m" },
];

async function start(): Promise<void> {
  const canvas = el<HTMLCanvasElement>("beam-canvas");
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("no 2d context");
  const status = el<HTMLElement>("connection-status");
  const banner = el<HTMLElement>("banner");
  const resetButton = el<HTMLButtonElement>("reset-failure");
  const gaugeBar = el<HTMLElement>("force-gauge-bar");
  const gaugeText = el<HTMLElement>("force-gauge-text");

  const params = new URLSearchParams(window.location.search);
  const url = params.get("server") ?? `ws://${window.location.hostname || "127.0.0.1"}:8765`;

  const client = new SimClient();
  status.textContent = `connecting to ${url} ...`;
  let config: ConfigValues;
  try {
    config = await client.connect(url, browserTransport);
  } catch (err) {
    status.textContent = `connection failed: ${err}`;
    return;
  }
  status.textContent = `connected (${config.structure}, ${config.n_elements} elements)`;
  client.onClose(() => {
    status.textContent = "disconnected - last known state shown";
  });

  const layout: SceneLayout = {
    widthPx: canvas.width,
    heightPx: canvas.height,
    // show +-4 gaps of vertical travel around the rest line
    verticalRangeM: 8 * config.gap_m,
  };
  const viewport: Viewport = {
    widthPx: canvas.width,
    heightPx: canvas.height,
    beamLengthM: config.length_m,
    lengthScale: config.length_scale,
    // a full-height drag spans the device force range
    verticalRangeDevice: (2 * config.device_force_max) / 33.0,
  };
  const stylus = new StylusController(viewport);

  const point = (event: PointerEvent): PointerPoint => {
    const rect = canvas.getBoundingClientRect();
    return { xPx: event.clientX - rect.left, yPx: event.clientY - rect.top };
  };
  canvas.addEventListener("pointerdown", (event) => {
    canvas.setPointerCapture(event.pointerId);
    void client.send(stylus.press(point(event)));
  });
  canvas.addEventListener("pointermove", (event) => {
    const command = stylus.drag(point(event));
    if (command) void client.send(command);
  });
  const endDrag = (event: PointerEvent) => {
    const command = stylus.release(point(event));
    if (command) void client.send(command);
  };
  canvas.addEventListener("pointerup", endDrag);
  canvas.addEventListener("pointercancel", endDrag);

  // parameter panel
  for (const field of PARAMETER_FIELDS) {
    const input = el<HTMLInputElement>(`param-${field.name}`);
    const errorBox = el<HTMLElement>(`param-${field.name}-error`);
    input.value = String(config[field.configKey]);
    input.addEventListener("change", () => {
      const check = validateParameter(field.name, input.value);
      if (!check.ok) {
        errorBox.textContent = check.error ?? "invalid";
        return;
      }
      errorBox.textContent = "";
      void client
        .send({ kind: "set_parameter", name: field.name, value: check.value! })
        .then((result) => {
          if (!result.ok) errorBox.textContent = result.error ?? "rejected";
        });
    });
  }

  el<HTMLSelectElement>("structure-select").addEventListener("change", (event) => {
    const preset = (event.target as HTMLSelectElement).value as "Cantilever" | "Microbridge";
    void client.send({ kind: "select_structure", preset });
  });

  resetButton.addEventListener("click", () => {
    void client.send({ kind: "reset_failure" });
  });

  const frame = () => {
    const snapshot = client.latestSnapshot;
    if (snapshot) {
      renderBeam(snapshot, ctx, layout);
      renderFeedbackArrow(snapshot, ctx, layout, config.device_force_max);
      const bannerState = deriveBanner(snapshot);
      banner.className = `banner banner-${bannerState.level}`;
      banner.textContent = bannerState.message;
      resetButton.style.display = bannerState.showReset ? "inline-block" : "none";
      const gauge = deriveFeedbackGauge(snapshot, config.device_force_max);
      gaugeBar.style.width = `${(gauge.fraction * 100).toFixed(1)}%`;
      gaugeText.textContent = `${gauge.magnitude.toFixed(3)} N`;
    }
    requestAnimationFrame(frame);
  };
  requestAnimationFrame(frame);
}

void start();
