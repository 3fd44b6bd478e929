import assert from "node:assert/strict";
import { test } from "node:test";

import { NaiveBackend } from "../src/backends";
import { decodePgm, GrayImage } from "../src/pgm";

function synthImage(width: number, height: number,
                    lines: Array<(row: number) => number | null>,
                    road = 96, paint = 255): GrayImage {
  const data = new Uint8Array(width * height).fill(road);
  for (let r = 0; r < height; r++) {
    for (const line of lines) {
      const x = line(r);
      if (x === null) continue;
      const c = Math.round(x);
      for (let dc = -1; dc <= 1; dc++) {
        const cc = c + dc;
        if (cc >= 0 && cc < width) data[r * width + cc] = paint;
      }
    }
  }
  return { width, height, data };
}

test("naive backend finds two straight lines near their true columns", () => {
  const backend = new NaiveBackend({ inputW: 160, inputH: 120 });
  const image = synthImage(160, 120, [() => 40.0, () => 120.0]);
  const reply = backend.detect(image) as { coeffs: number[][] };
  assert.equal(reply.coeffs.length, 2);
  for (const [want, got] of [[40, reply.coeffs[0]], [120, reply.coeffs[1]]] as
       Array<[number, number[]]>) {
    const atBottom = got[0] * 119 ** 3 + got[1] * 119 ** 2 + got[2] * 119 + got[3];
    assert.ok(Math.abs(atBottom - want) < 2.5,
              `bottom x ${atBottom} want ~${want}`);
  }
});

test("uniform image yields no lines", () => {
  const backend = new NaiveBackend({ inputW: 64, inputH: 48 });
  const image: GrayImage = { width: 64, height: 48,
                             data: new Uint8Array(64 * 48).fill(120) };
  const reply = backend.detect(image) as { coeffs: number[][] };
  assert.equal(reply.coeffs.length, 0);
});

test("short diagonal marks get a linear fit", () => {
  const backend = new NaiveBackend({ inputW: 160, inputH: 120 });
  // Only 20 rows of support: under the full-fit span, so degree 1.
  const image = synthImage(160, 120,
    [(r) => (r >= 50 && r < 70 ? 60 + (r - 50) * 0.8 : null)]);
  const reply = backend.detect(image) as { coeffs: number[][] };
  assert.equal(reply.coeffs.length, 1);
  const [c3, c2] = reply.coeffs[0];
  assert.equal(c3, 0);
  assert.equal(c2, 0);
});

test("image size mismatch raises", () => {
  const backend = new NaiveBackend({ inputW: 64, inputH: 48 });
  const image: GrayImage = { width: 32, height: 48,
                             data: new Uint8Array(32 * 48) };
  assert.throws(() => backend.detect(image), /does not match/);
});

test("pgm decode parses header and payload", () => {
  const header = Buffer.from("P5\n4 2\n255\n", "ascii");
  const pixels = Buffer.from([1, 2, 3, 4, 5, 6, 7, 8]);
  const img = decodePgm(Buffer.concat([header, pixels]));
  assert.equal(img.width, 4);
  assert.equal(img.height, 2);
  assert.deepEqual(Array.from(img.data), [1, 2, 3, 4, 5, 6, 7, 8]);
  assert.throws(() => decodePgm(Buffer.from("P6\n1 1\n255\n0", "ascii")));
  assert.throws(() => decodePgm(Buffer.concat([header, pixels.subarray(0, 4)])));
});
