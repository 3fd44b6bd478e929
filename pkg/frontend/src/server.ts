/** Wire protocol v1 server loop: line-delimited JSON over byte streams.
 *
 * One request is in flight at a time; every request id is answered exactly
 * once. Malformed input produces an error message and the connection stays
 * open. The loop ends when the input stream closes.
 */

import * as readline from "node:readline";
import { Readable, Writable } from "node:stream";
import { Backend } from "./backends";
import { decodePgm, maskPixelCount } from "./pgm";

export const PROTO_VERSION = 1;

type Reply = Record<string, unknown>;

export function handleLine(backend: Backend, line: string): Reply | null {
  const trimmed = line.trim();
  if (trimmed.length === 0) return null;
  let msg: Record<string, unknown>;
  try {
    const parsed = JSON.parse(trimmed);
    if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
      throw new Error("message is not an object");
    }
    msg = parsed as Record<string, unknown>;
  } catch (err) {
    return { type: "error", id: null, msg: `malformed message: ${String(err)}` };
  }
  const id = "id" in msg ? (msg.id as number | null) : null;
  try {
    switch (msg.type) {
      case "hello": {
        if (msg.proto !== PROTO_VERSION) {
          return { type: "error", id, msg: `unsupported protocol ${msg.proto}` };
        }
        return {
          type: "hello_ack",
          family: backend.family,
          input_w: backend.inputW,
          input_h: backend.inputH,
          gradient: backend.gradient,
        };
      }
      case "detect": {
        if (typeof id !== "number") {
          return { type: "error", id: null, msg: "detect needs a numeric id" };
        }
        const image = decodeImageField(msg, "image_pgm_b64");
        checkDims(backend, image.width, image.height);
        return { type: "lanes", id, ...backend.detect(image) };
      }
      case "gradient": {
        if (typeof id !== "number") {
          return { type: "error", id: null, msg: "gradient needs a numeric id" };
        }
        if (!backend.gradient) {
          return { type: "error", id, msg: "backend serves no gradients" };
        }
        const image = decodeImageField(msg, "image_pgm_b64");
        checkDims(backend, image.width, image.height);
        const mask = decodeImageField(msg, "mask_pgm_b64");
        if (mask.width !== image.width || mask.height !== image.height) {
          return { type: "error", id, msg: "mask does not match image size" };
        }
        const direction = typeof msg.direction === "string" ? msg.direction : "";
        if (direction !== "left" && direction !== "right") {
          return { type: "error", id, msg: `bad direction ${String(msg.direction)}` };
        }
        const values = backend.gradientValues(image, mask, direction);
        if (values.length !== maskPixelCount(mask)) {
          return { type: "error", id, msg: "gradient length mismatch" };
        }
        return { type: "grad", id, values };
      }
      default:
        return { type: "error", id, msg: `unknown type ${JSON.stringify(msg.type)}` };
    }
  } catch (err) {
    return { type: "error", id, msg: String(err instanceof Error ? err.message : err) };
  }
}

function decodeImageField(msg: Record<string, unknown>, key: string) {
  const b64 = msg[key];
  if (typeof b64 !== "string") {
    throw new Error(`missing ${key}`);
  }
  let raw: Buffer;
  try {
    raw = Buffer.from(b64, "base64");
  } catch (err) {
    throw new Error(`bad ${key}: ${String(err)}`);
  }
  if (raw.length === 0) throw new Error(`bad ${key}: empty payload`);
  return decodePgm(raw);
}

function checkDims(backend: Backend, w: number, h: number): void {
  if (w !== backend.inputW || h !== backend.inputH) {
    throw new Error(
      `image ${w}x${h} does not match detector input ` +
      `${backend.inputW}x${backend.inputH}`);
  }
}

/** Serve until the input stream ends. Resolves when the stream closes. */
export function serve(backend: Backend, input: Readable,
                      output: Writable): Promise<void> {
  const rl = readline.createInterface({ input, crlfDelay: Infinity });
  return new Promise((resolve) => {
    rl.on("line", (line) => {
      const reply = handleLine(backend, line);
      if (reply !== null) {
        output.write(JSON.stringify(reply) + "\n");
      }
    });
    rl.on("close", resolve);
  });
}
