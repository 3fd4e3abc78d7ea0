// Wire protocol types and codecs for the simulation service (JSON text
// frames over WebSocket; see docs/protocol.md in the repository root).

export const PROTOCOL_VERSION = 1;

export type StructurePreset = "Cantilever" | "Microbridge";

export interface ConfigValues {
  structure: StructurePreset;
  length_m: number;
  width_m: number;
  thickness_m: number;
  youngs_modulus_pa: number;
  density_kgm3: number;
  n_elements: number;
  gap_m: number;
  warn_fraction: number;
  length_scale: number;
  force_scale: number;
  device_force_max: number;
  dt_s: number;
  modal_modes: number;
  damping_alpha: number;
  damping_beta: number;
}

export const STICTION_FREE = 0;
export const STICTION_NEAR_CONTACT = 1;
export const STICTION_STUCK = 2;

export interface Snapshot {
  tick: number;
  sim_time: number;
  deflections: number[];
  rotations: number[];
  directors: number[][][];
  gaps: number[];
  contact: boolean[];
  stiction_state: number;
  stuck_nodes: number[];
  stick_time: number | null;
  feedback_device: [number, number, number];
  applied: boolean;
  attach_position: number | null;
  attach_displacement: number;
  parameters: Record<string, number | string>;
  stats: Record<string, number | boolean> | null;
}

export interface HelloMessage {
  type: "hello";
  protocol_version: number;
  config: ConfigValues;
}

export interface SnapshotMessage extends Snapshot {
  type: "snapshot";
}

export interface CommandAck {
  type: "command_ack";
  seq: number;
}

export interface CommandErr {
  type: "command_err";
  seq: number | null;
  error: string;
}

export interface StatsMessage {
  type: "stats";
  [key: string]: unknown;
}

export type ServerMessage =
  | HelloMessage
  | SnapshotMessage
  | CommandAck
  | CommandErr
  | StatsMessage;

export type ParameterName =
  | "youngs_modulus"
  | "density"
  | "n_elements"
  | "length"
  | "width"
  | "thickness"
  | "gap";

export type Command =
  | { kind: "apply_stylus"; x: number; y: number; z: number; applied: boolean; timestamp: number }
  | { kind: "set_parameter"; name: ParameterName; value: number }
  | { kind: "select_structure"; preset: StructurePreset }
  | { kind: "reset_failure" }
  | { kind: "pause" }
  | { kind: "resume" };

export function encodeCommand(seq: number, command: Command): string {
  return JSON.stringify({ type: "command", seq, command });
}

export function decodeServerMessage(text: string): ServerMessage {
  let payload: unknown;
  try {
    payload = JSON.parse(text);
  } catch (err) {
    throw new Error(`malformed server message: ${err}`);
  }
  if (typeof payload !== "object" || payload === null || !("type" in payload)) {
    throw new Error("server message must be an object with a 'type' field");
  }
  const message = payload as { type: string };
  switch (message.type) {
    case "hello":
    case "snapshot":
    case "command_ack":
    case "command_err":
    case "stats":
      return message as ServerMessage;
    default:
      throw new Error(`unknown server message type '${message.type}'`);
  }
}
