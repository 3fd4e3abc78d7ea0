// Beam scene rendering from a snapshot. Draws through a minimal 2D-context
// interface so the scene logic is testable without a real canvas.

import { Snapshot, STICTION_STUCK } from "./protocol.js";

export interface Context2DLike {
  clearRect(x: number, y: number, w: number, h: number): void;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  fillRect(x: number, y: number, w: number, h: number): void;
  strokeStyle: string | unknown;
  fillStyle: string | unknown;
  lineWidth: number;
}

export interface SceneLayout {
  widthPx: number;
  heightPx: number;
  /** vertical meters (micro world) spanned by the viewport height */
  verticalRangeM: number;
}

export interface SceneGeometry {
  /** polyline of the deflected beam in pixels, one vertex per node */
  beam: Array<[number, number]>;
  substrateYPx: number;
  stuckMarkers: Array<[number, number]>;
  attachMarker: [number, number] | null;
}

export function sceneFromSnapshot(snapshot: Snapshot, layout: SceneLayout): SceneGeometry {
  const n = snapshot.deflections.length;
  const lengthM = Number(snapshot.parameters["length_m"]);
  const gapM = Number(snapshot.parameters["gap_m"]);
  const midY = layout.heightPx / 2;
  const pxPerM = layout.heightPx / layout.verticalRangeM;
  const xPx = (sM: number) => (sM / lengthM) * layout.widthPx;
  const yPx = (wM: number) => midY - wM * pxPerM;

  const beam: Array<[number, number]> = [];
  for (let i = 0; i < n; i++) {
    beam.push([xPx((i * lengthM) / (n - 1)), yPx(snapshot.deflections[i]!)]);
  }
  const stuckMarkers: Array<[number, number]> = snapshot.stuck_nodes.map((node) => [
    xPx((node * lengthM) / (n - 1)),
    yPx(snapshot.deflections[node]!),
  ]);
  return {
    beam,
    substrateYPx: yPx(-gapM),
    stuckMarkers,
    attachMarker:
      snapshot.attach_position !== null
        ? [xPx(snapshot.attach_position), yPx(snapshot.attach_displacement)]
        : null,
  };
}

export function renderBeam(
  snapshot: Snapshot,
  ctx: Context2DLike,
  layout: SceneLayout,
): SceneGeometry {
  const scene = sceneFromSnapshot(snapshot, layout);
  ctx.clearRect(0, 0, layout.widthPx, layout.heightPx);

  // substrate
  ctx.strokeStyle = "#999";
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(0, scene.substrateYPx);
  ctx.lineTo(layout.widthPx, scene.substrateYPx);
  ctx.stroke();

  // beam polyline, failure styling when stuck
  ctx.strokeStyle = snapshot.stiction_state === STICTION_STUCK ? "#c0392b" : "#2c3e50";
  ctx.lineWidth = 4;
  ctx.beginPath();
  const first = scene.beam[0];
  if (first) ctx.moveTo(first[0], first[1]);
  for (const [x, y] of scene.beam.slice(1)) ctx.lineTo(x, y);
  ctx.stroke();

  // stuck nodes
  ctx.fillStyle = "#c0392b";
  for (const [x, y] of scene.stuckMarkers) {
    ctx.beginPath();
    ctx.arc(x, y, 5, 0, 2 * Math.PI);
    ctx.fill();
  }

  // attach point
  if (scene.attachMarker) {
    ctx.fillStyle = "#2980b9";
    ctx.beginPath();
    ctx.arc(scene.attachMarker[0], scene.attachMarker[1], 6, 0, 2 * Math.PI);
    ctx.fill();
  }
  return scene;
}

/** Feedback force arrow anchored at the attach point (or viewport center). */
export function renderFeedbackArrow(
  snapshot: Snapshot,
  ctx: Context2DLike,
  layout: SceneLayout,
  deviceForceMax: number,
): void {
  const [fx, fy] = snapshot.feedback_device;
  const magnitude = Math.hypot(fx, fy);
  if (magnitude === 0 || deviceForceMax <= 0) return;
  const scene = sceneFromSnapshot(snapshot, layout);
  const anchor = scene.attachMarker ?? [layout.widthPx / 2, layout.heightPx / 2];
  const maxLen = layout.heightPx / 3;
  const len = (Math.min(magnitude / deviceForceMax, 1) * maxLen);
  const ux = fx / magnitude;
  const uy = -fy / magnitude; // screen y is flipped
  ctx.strokeStyle = "#e67e22";
  ctx.lineWidth = 3;
  ctx.beginPath();
  ctx.moveTo(anchor[0], anchor[1]);
  ctx.lineTo(anchor[0] + ux * len, anchor[1] + uy * len);
  ctx.stroke();
}
