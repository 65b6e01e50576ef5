/**
 * Cross-language round trip: files this package writes must drive the Python
 * `steer` CLI unmodified, and files that CLI writes must read back here.
 */

import { spawnSync } from "node:child_process";
import fs from "node:fs";
import os from "node:os";
import path from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { exportEmbeddings } from "../src/exporter.js";
import { embRow, idsPath, readEmb, writeEmb } from "../src/formats.js";
import { makeMiniDataset } from "./helpers.js";

let root: string;

function steer(...args: string[]): { stdout: string; stderr: string } {
  const proc = spawnSync("steer", args, { encoding: "utf-8" });
  if (proc.error) {
    throw new Error(`cannot run steer: ${proc.error.message}; install the Python package first`);
  }
  expect(proc.status, `steer ${args.join(" ")}\n${proc.stderr}`).toBe(0);
  return { stdout: proc.stdout, stderr: proc.stderr };
}

beforeAll(() => {
  const probe = spawnSync("steer", ["--version"], { encoding: "utf-8" });
  if (probe.error || probe.status !== 0) {
    throw new Error("the steer CLI is required on PATH for interop tests");
  }
  root = fs.mkdtempSync(path.join(os.tmpdir(), "steer-interop-"));
});

afterAll(() => {
  if (root) fs.rmSync(root, { recursive: true, force: true });
});

describe("exported files drive the steer pipeline", () => {
  it("align, transform, search and eval accept an export untouched", async () => {
    const dataDir = path.join(root, "mini");
    const outDir = path.join(root, "export");
    makeMiniDataset(dataDir, { docs: 40, queries: 5 });
    await exportEmbeddings({
      model: "hashed:48",
      serverModel: "hashed:64",
      dataset: dataDir,
      outDir,
    });

    const model = path.join(root, "model.steer");
    steer(
      "align",
      "--pairs-local", path.join(outDir, "corpus.local.emb"),
      "--pairs-server", path.join(outDir, "corpus.server.emb"),
      "--method", "linear",
      "--out", model,
    );

    const aligned = path.join(root, "queries.aligned.emb");
    steer("transform", "--model", model, "--in", path.join(outDir, "queries.local.emb"), "--out", aligned);
    const back = readEmb(aligned);
    expect(back.dim).toBe(64); // mapped into the server space
    expect(back.count).toBe(5);

    const run = path.join(root, "run.tsv");
    steer(
      "search",
      "--corpus", path.join(outDir, "corpus.server.emb"),
      "--queries", aligned,
      "--k", "10",
      "--out", run,
    );

    const evalOut = steer(
      "eval", "recall",
      "--run", run,
      "--qrels", path.join(outDir, "qrels.tsv"),
      "--k", "1,5,10",
      "--json",
    );
    const report = JSON.parse(evalOut.stdout);
    expect(report.missing_queries).toEqual([]);
    expect(report.rows).toHaveLength(3);
    for (const row of report.rows) {
      expect(row.recall).toBeGreaterThanOrEqual(0);
      expect(row.recall).toBeLessThanOrEqual(1);
    }
    // alignment was fit on these very texts, so the mapped queries should
    // find at least part of their planted neighborhoods
    const atTen = report.rows.find((r: { k: number }) => r.k === 10);
    expect(atTen.recall).toBeGreaterThan(0);
  });

  it("privacy evaluation accepts exported queries", async () => {
    const dataDir = path.join(root, "mini-priv");
    const outDir = path.join(root, "export-priv");
    makeMiniDataset(dataDir, { docs: 12, queries: 3 });
    await exportEmbeddings({ model: "hashed:32", dataset: dataDir, outDir });
    const evalOut = steer(
      "eval", "privacy",
      "--approx", path.join(outDir, "queries.emb"),
      "--truth", path.join(outDir, "queries.emb"),
      "--json",
    );
    const report = JSON.parse(evalOut.stdout);
    expect(report.summary.mean).toBeCloseTo(1, 6); // identical files, cos == 1
  });
});

describe("files written by the python toolkit", () => {
  it("read back and re-write byte-identically", () => {
    const taskDir = path.join(root, "synth");
    const spec = path.join(root, "spec.json");
    fs.writeFileSync(
      spec,
      JSON.stringify({
        m: 20, p: 6, q: 8, map_kind: "linear-random", seed: 0,
        corpus_size: 40, query_count: 5, relevant_per_query: 2,
      }),
    );
    steer("synth", "--spec", spec, "--out-dir", taskDir);

    const corpusPath = path.join(taskDir, "corpus.emb");
    const corpus = readEmb(corpusPath);
    expect(corpus.count).toBe(40);
    expect(corpus.dim).toBe(8);
    expect(corpus.ids).toHaveLength(40);
    for (let i = 0; i < corpus.count; i++) {
      for (const v of embRow(corpus, i)) expect(Number.isFinite(v)).toBe(true);
    }

    const rewritten = path.join(root, "rewritten.emb");
    writeEmb(rewritten, corpus.ids.map((_, i) => new Float32Array(embRow(corpus, i))), corpus.ids);
    expect(fs.readFileSync(rewritten).equals(fs.readFileSync(corpusPath))).toBe(true);
    expect(fs.readFileSync(idsPath(rewritten)).equals(fs.readFileSync(idsPath(corpusPath)))).toBe(true);
  });
});
