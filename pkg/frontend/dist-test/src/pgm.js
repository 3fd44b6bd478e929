"use strict";
/** Binary PGM (P5) decoding for protocol image payloads. */
Object.defineProperty(exports, "__esModule", { value: true });
exports.decodePgm = decodePgm;
exports.maskPixelCount = maskPixelCount;
function decodePgm(buf) {
    if (buf.length < 2 || buf[0] !== 0x50 || buf[1] !== 0x35) {
        throw new Error("not a binary PGM (P5) payload");
    }
    const fields = [];
    let pos = 2;
    while (fields.length < 3) {
        while (pos < buf.length && isSpace(buf[pos]))
            pos++;
        if (buf[pos] === 0x23) {
            // comment line
            while (pos < buf.length && buf[pos] !== 0x0a)
                pos++;
            continue;
        }
        let start = pos;
        while (pos < buf.length && !isSpace(buf[pos]))
            pos++;
        const field = Number.parseInt(buf.subarray(start, pos).toString("ascii"), 10);
        if (!Number.isFinite(field))
            throw new Error("bad PGM header field");
        fields.push(field);
    }
    pos++; // single whitespace after maxval
    const [width, height, maxval] = fields;
    if (maxval !== 255)
        throw new Error("only 8-bit PGM is supported");
    const need = width * height;
    if (buf.length - pos < need)
        throw new Error("truncated PGM payload");
    return { width, height, data: new Uint8Array(buf.subarray(pos, pos + need)) };
}
function isSpace(byte) {
    return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}
function maskPixelCount(mask) {
    let n = 0;
    for (const v of mask.data)
        if (v > 0)
            n++;
    return n;
}
