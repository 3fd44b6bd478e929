import assert from "node:assert/strict";
import { test } from "node:test";
import * as fs from "node:fs";
import * as path from "node:path";
import { PassThrough } from "node:stream";

import { buildBackend } from "../src/main";
import { handleLine, serve } from "../src/server";

const fixturePath = path.join(__dirname, "..", "..", "test", "fixtures",
                              "golden_transcript.json");

interface Exchange {
  send?: Record<string, unknown>;
  send_raw?: string;
  expect: Record<string, unknown>;
}

interface Fixture {
  backend_args: string[];
  exchanges: Exchange[];
}

function loadFixture(): Fixture {
  // dist-test layout nests src/ and test/; fall back to the repo path.
  const candidates = [
    fixturePath,
    path.join(__dirname, "fixtures", "golden_transcript.json"),
  ];
  for (const cand of candidates) {
    if (fs.existsSync(cand)) {
      return JSON.parse(fs.readFileSync(cand, "utf-8")) as Fixture;
    }
  }
  throw new Error("golden transcript fixture not found");
}

function argsMap(argv: string[]): Map<string, string> {
  const out = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    out.set(argv[i].slice(2), argv[i + 1]);
  }
  return out;
}

function checkReply(reply: Record<string, unknown> | null,
                    expected: Record<string, unknown>): void {
  assert.ok(reply, "server stayed silent");
  for (const [key, value] of Object.entries(expected)) {
    assert.deepEqual(reply![key], value,
      `field ${key}: got ${JSON.stringify(reply![key])}, ` +
      `want ${JSON.stringify(value)}`);
  }
  if (expected.type === "error") {
    assert.equal(typeof reply!.msg, "string");
    assert.ok((reply!.msg as string).length > 0, "errors carry a message");
  } else {
    // Non-error replies are pinned exactly (modulo key order).
    const extra = Object.keys(reply!).filter((k) => !(k in expected));
    assert.deepEqual(extra, [], `unexpected fields ${extra}`);
  }
}

test("golden transcript passes through handleLine", () => {
  const fixture = loadFixture();
  const backend = buildBackend(argsMap(fixture.backend_args));
  for (const [i, exchange] of fixture.exchanges.entries()) {
    const line = exchange.send_raw ?? JSON.stringify(exchange.send);
    const reply = handleLine(backend, line);
    try {
      checkReply(reply, exchange.expect);
    } catch (err) {
      throw new Error(`exchange ${i + 1}: ${String(err)}`);
    }
  }
});

test("golden transcript over streams answers every line once", async () => {
  const fixture = loadFixture();
  const backend = buildBackend(argsMap(fixture.backend_args));
  const input = new PassThrough();
  const output = new PassThrough();
  const done = serve(backend, input, output);
  for (const exchange of fixture.exchanges) {
    input.write((exchange.send_raw ?? JSON.stringify(exchange.send)) + "\n");
  }
  input.end();
  await done;
  const lines = output.read()!.toString("utf-8").trim().split("\n");
  assert.equal(lines.length, fixture.exchanges.length);
  for (const [i, exchange] of fixture.exchanges.entries()) {
    checkReply(JSON.parse(lines[i]), exchange.expect);
  }
});

test("blank lines are ignored, connection stays usable", () => {
  const backend = buildBackend(argsMap(["--backend", "echo"]));
  assert.equal(handleLine(backend, "   "), null);
  const reply = handleLine(backend, JSON.stringify({ type: "hello", proto: 1 }));
  assert.equal(reply!.type, "hello_ack");
});

test("unsupported protocol version is an error", () => {
  const backend = buildBackend(argsMap(["--backend", "echo"]));
  const reply = handleLine(backend, JSON.stringify({ type: "hello", proto: 2 }));
  assert.equal(reply!.type, "error");
});
