// Virtual stylus: pointer press-and-drag over the beam viewport becomes a
// stream of apply_stylus commands carrying device-space positions. The
// service turns drag distance into force (virtual spring), so the client
// sends positions only and never simulates anything itself.

import { Command } from "./protocol.js";

export interface Viewport {
  widthPx: number;
  heightPx: number;
  beamLengthM: number;     // micro world
  lengthScale: number;     // device meters per micro meter
  /** device meters of vertical stylus travel represented by the viewport height */
  verticalRangeDevice: number;
}

export interface PointerPoint {
  xPx: number;
  yPx: number;
}

/** Screen pixels -> device-space stylus position (z = 0, screen plane). */
export function pointerToDevice(p: PointerPoint, view: Viewport): [number, number, number] {
  const spanDevice = view.beamLengthM * view.lengthScale;
  const x = (p.xPx / view.widthPx) * spanDevice;
  // screen y grows downward; device y grows upward
  const y = -((p.yPx - view.heightPx / 2) / view.heightPx) * view.verticalRangeDevice;
  return [x, y, 0];
}

export class StylusController {
  private grabbed = false;
  private grabX = 0; // device x latched at press so the attach point is stable

  constructor(
    private view: Viewport,
    private now: () => number = () => Date.now() / 1000,
  ) {}

  get isGrabbed(): boolean {
    return this.grabbed;
  }

  /** Press on the beam: captures the grab point and starts applying. */
  press(p: PointerPoint): Command {
    const [x, y] = pointerToDevice(p, this.view);
    this.grabbed = true;
    this.grabX = x;
    return { kind: "apply_stylus", x, y, z: 0, applied: true, timestamp: this.now() };
  }

  /** Drag while pressed: same attach x, vertical travel applies the load. */
  drag(p: PointerPoint): Command | null {
    if (!this.grabbed) return null;
    const [, y] = pointerToDevice(p, this.view);
    return {
      kind: "apply_stylus",
      x: this.grabX,
      y,
      z: 0,
      applied: true,
      timestamp: this.now(),
    };
  }

  /** Release: load removed, beam relaxes server-side. */
  release(p: PointerPoint): Command | null {
    if (!this.grabbed) return null;
    this.grabbed = false;
    const [, y] = pointerToDevice(p, this.view);
    return {
      kind: "apply_stylus",
      x: this.grabX,
      y,
      z: 0,
      applied: false,
      timestamp: this.now(),
    };
  }
}
