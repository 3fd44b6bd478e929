"use strict";
/** Wire protocol v1 server loop: line-delimited JSON over byte streams.
 *
 * One request is in flight at a time; every request id is answered exactly
 * once. Malformed input produces an error message and the connection stays
 * open. The loop ends when the input stream closes.
 */
var __createBinding = (this && this.__createBinding) || (Object.create ? (function(o, m, k, k2) {
    if (k2 === undefined) k2 = k;
    var desc = Object.getOwnPropertyDescriptor(m, k);
    if (!desc || ("get" in desc ? !m.__esModule : desc.writable || desc.configurable)) {
      desc = { enumerable: true, get: function() { return m[k]; } };
    }
    Object.defineProperty(o, k2, desc);
}) : (function(o, m, k, k2) {
    if (k2 === undefined) k2 = k;
    o[k2] = m[k];
}));
var __setModuleDefault = (this && this.__setModuleDefault) || (Object.create ? (function(o, v) {
    Object.defineProperty(o, "default", { enumerable: true, value: v });
}) : function(o, v) {
    o["default"] = v;
});
var __importStar = (this && this.__importStar) || (function () {
    var ownKeys = function(o) {
        ownKeys = Object.getOwnPropertyNames || function (o) {
            var ar = [];
            for (var k in o) if (Object.prototype.hasOwnProperty.call(o, k)) ar[ar.length] = k;
            return ar;
        };
        return ownKeys(o);
    };
    return function (mod) {
        if (mod && mod.__esModule) return mod;
        var result = {};
        if (mod != null) for (var k = ownKeys(mod), i = 0; i < k.length; i++) if (k[i] !== "default") __createBinding(result, mod, k[i]);
        __setModuleDefault(result, mod);
        return result;
    };
})();
Object.defineProperty(exports, "__esModule", { value: true });
exports.PROTO_VERSION = void 0;
exports.handleLine = handleLine;
exports.serve = serve;
const readline = __importStar(require("node:readline"));
const pgm_1 = require("./pgm");
exports.PROTO_VERSION = 1;
function handleLine(backend, line) {
    const trimmed = line.trim();
    if (trimmed.length === 0)
        return null;
    let msg;
    try {
        const parsed = JSON.parse(trimmed);
        if (typeof parsed !== "object" || parsed === null || Array.isArray(parsed)) {
            throw new Error("message is not an object");
        }
        msg = parsed;
    }
    catch (err) {
        return { type: "error", id: null, msg: `malformed message: ${String(err)}` };
    }
    const id = "id" in msg ? msg.id : null;
    try {
        switch (msg.type) {
            case "hello": {
                if (msg.proto !== exports.PROTO_VERSION) {
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
                if (values.length !== (0, pgm_1.maskPixelCount)(mask)) {
                    return { type: "error", id, msg: "gradient length mismatch" };
                }
                return { type: "grad", id, values };
            }
            default:
                return { type: "error", id, msg: `unknown type ${JSON.stringify(msg.type)}` };
        }
    }
    catch (err) {
        return { type: "error", id, msg: String(err instanceof Error ? err.message : err) };
    }
}
function decodeImageField(msg, key) {
    const b64 = msg[key];
    if (typeof b64 !== "string") {
        throw new Error(`missing ${key}`);
    }
    let raw;
    try {
        raw = Buffer.from(b64, "base64");
    }
    catch (err) {
        throw new Error(`bad ${key}: ${String(err)}`);
    }
    if (raw.length === 0)
        throw new Error(`bad ${key}: empty payload`);
    return (0, pgm_1.decodePgm)(raw);
}
function checkDims(backend, w, h) {
    if (w !== backend.inputW || h !== backend.inputH) {
        throw new Error(`image ${w}x${h} does not match detector input ` +
            `${backend.inputW}x${backend.inputH}`);
    }
}
/** Serve until the input stream ends. Resolves when the stream closes. */
function serve(backend, input, output) {
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
