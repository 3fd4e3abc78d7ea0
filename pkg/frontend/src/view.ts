// Pure view-state derivation: banners, validation, feedback gauge. No DOM,
// no physics — everything derives from the latest snapshot so the headless
// integration test exercises exactly what the browser shell shows.

import {
  ParameterName,
  Snapshot,
  STICTION_NEAR_CONTACT,
  STICTION_STUCK,
} from "./protocol.js";

export type BannerLevel = "none" | "warning" | "failure";

export interface BannerState {
  level: BannerLevel;
  message: string;
  /** failure banners persist and carry the Reset Failure action */
  showReset: boolean;
}

export function deriveBanner(snapshot: Snapshot | null): BannerState {
  if (!snapshot) {
    return { level: "none", message: "", showReset: false };
  }
  if (snapshot.stiction_state === STICTION_STUCK) {
    const nodes = snapshot.stuck_nodes.join(", ");
    return {
      level: "failure",
      message: `Stiction failure: the beam is stuck to the substrate (nodes ${nodes}).`,
      showReset: true,
    };
  }
  if (snapshot.stiction_state === STICTION_NEAR_CONTACT) {
    return {
      level: "warning",
      message: "Warning: the beam is very close to the substrate.",
      showReset: false,
    };
  }
  return { level: "none", message: "", showReset: false };
}

// mirrors the server-side invariants so bad edits never leave the form
const PARAMETER_RULES: Record<ParameterName, { min: number; integer: boolean; label: string }> = {
  youngs_modulus: { min: 0, integer: false, label: "Young's modulus (Pa)" },
  density: { min: 0, integer: false, label: "density (kg/m^3)" },
  n_elements: { min: 1, integer: true, label: "number of elements" },
  length: { min: 0, integer: false, label: "length (m)" },
  width: { min: 0, integer: false, label: "width (m)" },
  thickness: { min: 0, integer: false, label: "thickness (m)" },
  gap: { min: 0, integer: false, label: "gap (m)" },
};

export interface ValidationResult {
  ok: boolean;
  value?: number;
  error?: string;
}

export function validateParameter(name: ParameterName, raw: string): ValidationResult {
  const rule = PARAMETER_RULES[name];
  const value = Number(raw);
  if (raw.trim() === "" || !Number.isFinite(value)) {
    return { ok: false, error: `${rule.label} must be a finite number` };
  }
  if (rule.integer && !Number.isInteger(value)) {
    return { ok: false, error: `${rule.label} must be an integer` };
  }
  if (rule.integer ? value < rule.min : value <= rule.min) {
    return {
      ok: false,
      error: `${rule.label} must be ${rule.integer ? ">=" : ">"} ${rule.min}`,
    };
  }
  return { ok: true, value };
}

export interface FeedbackGauge {
  magnitude: number;      // N, device space
  fraction: number;       // of the clamp, in [0, 1]
  directionDeg: number;   // screen-plane angle of the (x, y) components
}

export function deriveFeedbackGauge(
  snapshot: Snapshot | null,
  deviceForceMax: number,
): FeedbackGauge {
  if (!snapshot) return { magnitude: 0, fraction: 0, directionDeg: 0 };
  const [fx, fy] = snapshot.feedback_device;
  const magnitude = Math.hypot(...snapshot.feedback_device);
  return {
    magnitude,
    fraction: deviceForceMax > 0 ? Math.min(magnitude / deviceForceMax, 1) : 0,
    directionDeg: (Math.atan2(fy, fx) * 180) / Math.PI,
  };
}
