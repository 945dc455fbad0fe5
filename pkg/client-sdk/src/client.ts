import net from "node:net";

import {
  Envelope,
  FrameSplitter,
  JsonValue,
  ProtocolError,
  encodeFrame,
} from "./envelope.js";

export class ConnectionLost extends Error {}

type Callback = (env: Envelope) => void;

/**
 * Bridge client over TCP.  Callbacks run on the receive path in per-topic
 * arrival order; publishing from callbacks is fine.  Server pings on the
 * /status topic are answered automatically.
 */
export class Client {
  #host: string;
  #port: number;
  #sock: net.Socket | null = null;
  #splitter = new FrameSplitter();
  #callbacks = new Map<string, Callback[]>();
  #seq = new Map<string, number>();
  #statusSeq = 0;

  onStatus: ((env: Envelope) => void) | null = null;
  onDisconnect: ((reason: string) => void) | null = null;

  constructor(options: { host?: string; port: number }) {
    this.#host = options.host ?? "127.0.0.1";
    this.#port = options.port;
  }

  get connected(): boolean {
    return this.#sock !== null;
  }

  connect(): Promise<void> {
    return new Promise((resolve, reject) => {
      const sock = net.createConnection(
        { host: this.#host, port: this.#port, noDelay: true },
        () => {
          this.#sock = sock;
          resolve();
        },
      );
      sock.on("error", (err) => {
        if (this.#sock === null) {
          reject(err);
        } else {
          this.#drop(String(err));
        }
      });
      sock.on("data", (chunk) => this.#onData(chunk));
      sock.on("close", () => this.#drop("closed by peer"));
    });
  }

  close(): void {
    const sock = this.#sock;
    this.#sock = null;
    sock?.destroy();
  }

  advertise(topic: string): void {
    this.#send({ op: "advertise", topic, seq: 0, stamp: Date.now() / 1000, msg: null });
  }

  subscribe(topic: string, callback: Callback): void {
    const list = this.#callbacks.get(topic) ?? [];
    list.push(callback);
    this.#callbacks.set(topic, list);
    this.#send({ op: "subscribe", topic, seq: 0, stamp: Date.now() / 1000, msg: null });
  }

  publish(topic: string, msg: JsonValue, stamp?: number): void {
    const seq = (this.#seq.get(topic) ?? 0) + 1;
    this.#seq.set(topic, seq);
    this.#send({
      op: "publish",
      topic,
      seq,
      stamp: stamp ?? Date.now() / 1000,
      msg,
    });
  }

  #send(env: Envelope): void {
    if (this.#sock === null) {
      throw new ConnectionLost("client is disconnected");
    }
    this.#sock.write(encodeFrame(env));
  }

  #drop(reason: string): void {
    if (this.#sock === null) {
      return;
    }
    const sock = this.#sock;
    this.#sock = null;
    sock.destroy();
    this.onDisconnect?.(reason);
  }

  #onData(chunk: Buffer): void {
    let envelopes: Envelope[];
    try {
      envelopes = this.#splitter.push(chunk);
    } catch (err) {
      if (err instanceof ProtocolError) {
        this.#drop(err.message);
        return;
      }
      throw err;
    }
    for (const env of envelopes) {
      this.#dispatch(env);
    }
  }

  #dispatch(env: Envelope): void {
    if (env.op === "status") {
      const msg = env.msg as { event?: string } | null;
      if (msg && msg.event === "ping" && this.#sock !== null) {
        this.#statusSeq += 1;
        this.#send({
          op: "status",
          topic: "/status",
          seq: this.#statusSeq,
          stamp: Date.now() / 1000,
          msg: { event: "pong" },
        });
      }
      this.onStatus?.(env);
      return;
    }
    for (const cb of this.#callbacks.get(env.topic) ?? []) {
      cb(env);
    }
  }
}

/** Typed convenience wrapper around one topic. */
export class Topic<T extends JsonValue> {
  #client: Client;
  #name: string;

  constructor(options: { client: Client; name: string }) {
    this.#client = options.client;
    this.#name = options.name;
  }

  advertise(): void {
    this.#client.advertise(this.#name);
  }

  publish(message: T, stamp?: number): void {
    this.#client.publish(this.#name, message, stamp);
  }

  subscribe(callback: (message: T, env: Envelope) => void): void {
    this.#client.subscribe(this.#name, (env) => callback(env.msg as T, env));
  }
}
