"use strict";
/** Adapter entry point: serve a backend over standard pipes.
 *
 *   node dist/main.js --backend echo|naive [--width N] [--height N]
 *                     [--coeffs JSON]
 *
 * The harness launches this as a child process (detector `cmd:` option) and
 * speaks wire protocol v1 over stdin/stdout.
 */
Object.defineProperty(exports, "__esModule", { value: true });
exports.buildBackend = buildBackend;
const backends_1 = require("./backends");
const server_1 = require("./server");
function parseArgs(argv) {
    const out = new Map();
    for (let i = 0; i < argv.length; i++) {
        const arg = argv[i];
        if (!arg.startsWith("--"))
            continue;
        const key = arg.slice(2);
        const value = i + 1 < argv.length && !argv[i + 1].startsWith("--")
            ? argv[++i] : "true";
        out.set(key, value);
    }
    return out;
}
function buildBackend(args) {
    const width = Number.parseInt(args.get("width") ?? "320", 10);
    const height = Number.parseInt(args.get("height") ?? "192", 10);
    const kind = args.get("backend") ?? "echo";
    if (kind === "naive") {
        return new backends_1.NaiveBackend({ inputW: width, inputH: height });
    }
    if (kind === "echo") {
        const coeffsArg = args.get("coeffs");
        return new backends_1.EchoBackend({
            inputW: width,
            inputH: height,
            coeffs: coeffsArg ? JSON.parse(coeffsArg) : undefined,
        });
    }
    throw new Error(`unknown backend ${kind}`);
}
if (require.main === module) {
    const backend = buildBackend(parseArgs(process.argv.slice(2)));
    (0, server_1.serve)(backend, process.stdin, process.stdout).then(() => process.exit(0));
}
