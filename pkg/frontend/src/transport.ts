// Transport abstraction: native WebSocket in the browser, raw TCP (node)
// for scripted tests. Both deliver the same JSON messages.

import { FrameDecoder, WireMessage, decodeMessage, encodeFrame, encodeMessage } from "./protocol.js";

export interface Transport {
  send(msg: WireMessage): void;
  onMessage(cb: (msg: WireMessage) => void): void;
  onClose(cb: () => void): void;
  close(): void;
}

export class WsTransport implements Transport {
  private ws: WebSocket;
  private messageCb: ((msg: WireMessage) => void) | null = null;
  private closeCb: (() => void) | null = null;

  constructor(url: string) {
    this.ws = new WebSocket(url);
    this.ws.onmessage = (event) => {
      if (this.messageCb) this.messageCb(decodeMessage(String(event.data)));
    };
    this.ws.onclose = () => this.closeCb?.();
    this.ws.onerror = () => this.closeCb?.();
  }

  ready(): Promise<void> {
    if (this.ws.readyState === WebSocket.OPEN) return Promise.resolve();
    return new Promise((resolve, reject) => {
      this.ws.addEventListener("open", () => resolve(), { once: true });
      this.ws.addEventListener("error", () => reject(new Error("connect failed")), { once: true });
    });
  }

  send(msg: WireMessage): void {
    this.ws.send(encodeMessage(msg));
  }

  onMessage(cb: (msg: WireMessage) => void): void {
    this.messageCb = cb;
  }

  onClose(cb: () => void): void {
    this.closeCb = cb;
  }

  close(): void {
    this.ws.close();
  }
}

/** Node-only raw TCP transport with length-prefixed framing. */
export class TcpTransport implements Transport {
  private socket: any;
  private decoder = new FrameDecoder();
  private messageCb: ((msg: WireMessage) => void) | null = null;
  private closeCb: (() => void) | null = null;

  private constructor(socket: any) {
    this.socket = socket;
    socket.on("data", (chunk: Uint8Array) => {
      for (const msg of this.decoder.feed(chunk)) this.messageCb?.(msg);
    });
    socket.on("close", () => this.closeCb?.());
    socket.on("error", () => this.closeCb?.());
  }

  static async connect(host: string, port: number): Promise<TcpTransport> {
    const net = await import("node:net");
    return new Promise((resolve, reject) => {
      const socket = net.createConnection({ host, port }, () => resolve(new TcpTransport(socket)));
      socket.on("error", reject);
    });
  }

  send(msg: WireMessage): void {
    this.socket.write(encodeFrame(msg));
  }

  onMessage(cb: (msg: WireMessage) => void): void {
    this.messageCb = cb;
  }

  onClose(cb: () => void): void {
    this.closeCb = cb;
  }

  close(): void {
    this.socket.destroy();
  }
}
