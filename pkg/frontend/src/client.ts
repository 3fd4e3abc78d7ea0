// Connection to the simulation service. The client is stateless with respect
// to physics: it renders only from the latest received snapshot and every
// user action maps to exactly one protocol command.

import {
  Command,
  ConfigValues,
  ServerMessage,
  Snapshot,
  decodeServerMessage,
  encodeCommand,
} from "./protocol.js";

// Transport abstraction so the same client runs on the browser WebSocket and
// on the node 'ws' package in headless tests.
export interface Transport {
  send(text: string): void;
  close(): void;
  onMessage(cb: (text: string) => void): void;
  onClose(cb: () => void): void;
}

export type ConnectFn = (url: string) => Promise<Transport>;

export interface CommandResult {
  ok: boolean;
  error?: string;
}

export class SimClient {
  connected = false;
  config: ConfigValues | null = null;
  latestSnapshot: Snapshot | null = null;
  snapshotCount = 0;

  private transport: Transport | null = null;
  private seq = 0;
  private pending = new Map<number, (result: CommandResult) => void>();
  private snapshotListeners: Array<(snapshot: Snapshot) => void> = [];
  private closeListeners: Array<() => void> = [];

  async connect(url: string, connectFn: ConnectFn): Promise<ConfigValues> {
    const transport = await connectFn(url);
    this.transport = transport;
    transport.onClose(() => {
      this.connected = false;
      for (const cb of this.closeListeners) cb();
    });
    const hello = new Promise<ConfigValues>((resolve, reject) => {
      const timer = setTimeout(() => reject(new Error("hello timeout")), 10000);
      transport.onMessage((text) => {
        let message: ServerMessage;
        try {
          message = decodeServerMessage(text);
        } catch {
          return; // tolerate unknown frames; the last good state stays up
        }
        if (message.type === "hello") {
          clearTimeout(timer);
          this.config = message.config;
          this.connected = true;
          resolve(message.config);
        } else {
          this.dispatch(message);
        }
      });
    });
    return hello;
  }

  private dispatch(message: ServerMessage): void {
    if (message.type === "snapshot") {
      const { type: _type, ...snapshot } = message;
      this.latestSnapshot = snapshot as Snapshot;
      this.snapshotCount += 1;
      for (const cb of this.snapshotListeners) cb(this.latestSnapshot);
    } else if (message.type === "command_ack") {
      this.pending.get(message.seq)?.({ ok: true });
      this.pending.delete(message.seq);
    } else if (message.type === "command_err") {
      if (message.seq !== null) {
        this.pending.get(message.seq)?.({ ok: false, error: message.error });
        this.pending.delete(message.seq);
      }
    }
  }

  onSnapshot(cb: (snapshot: Snapshot) => void): void {
    this.snapshotListeners.push(cb);
  }

  onClose(cb: () => void): void {
    this.closeListeners.push(cb);
  }

  /** Send a command; resolves with the server's ack or rejection. */
  send(command: Command): Promise<CommandResult> {
    if (!this.transport || !this.connected) {
      return Promise.resolve({ ok: false, error: "not connected" });
    }
    const seq = ++this.seq;
    const result = new Promise<CommandResult>((resolve) => {
      this.pending.set(seq, resolve);
    });
    this.transport.send(encodeCommand(seq, command));
    return result;
  }

  /** Resolve on the next snapshot strictly after the current one. */
  nextSnapshot(timeoutMs = 5000): Promise<Snapshot> {
    return new Promise((resolve, reject) => {
      const timer = setTimeout(
        () => reject(new Error("snapshot timeout")), timeoutMs);
      const once = (snapshot: Snapshot) => {
        clearTimeout(timer);
        const index = this.snapshotListeners.indexOf(once);
        if (index >= 0) this.snapshotListeners.splice(index, 1);
        resolve(snapshot);
      };
      this.snapshotListeners.push(once);
    });
  }

  close(): void {
    this.transport?.close();
    this.connected = false;
  }
}
