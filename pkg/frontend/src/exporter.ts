/**
 * Export pipeline: load a BEIR-layout dataset, encode corpus and queries with
 * one or two models, and emit steer embedding files plus qrels and a manifest.
 *
 * With one model the output is space-neutral (`corpus.emb`, `queries.emb`).
 * With a server model as well, both spaces are emitted; the two corpus files
 * share ids and row order, so they feed `steer align` directly as the
 * local/server training pair, and `corpus.server.emb` is the retrieval index.
 */

import path from "node:path";

import { loadDataset, subsample, type TextItem } from "./dataset.js";
import { EncodeError, resolveEncoder, type Encoder } from "./encoders.js";
import { writeEmb, writeQrels } from "./formats.js";
import { writeManifest, type ExportManifest } from "./manifest.js";

export interface ExportRequest {
  model: string;
  serverModel?: string | null;
  dataset: string;
  split?: string;
  maxItems?: number | null;
  maxQueries?: number | null;
  batchSize?: number;
  normalize?: boolean;
  outDir: string;
}

export interface ExportFailure {
  id: string;
  stage: "corpus" | "queries";
  error: string;
}

export interface ExportResult {
  manifest: ExportManifest;
  manifestPath: string;
}

interface EncodedSet {
  ids: string[];
  rows: Float32Array[];
}

/**
 * Encode items batch by batch. A failing batch is retried item by item so one
 * bad document costs one row, not the batch; failures are reported, the row
 * is skipped everywhere (including the paired encoder's output) and the
 * export is marked partial.
 */
async function encodeItems(
  encoder: Encoder,
  items: TextItem[],
  batchSize: number,
  stage: "corpus" | "queries",
  failures: ExportFailure[],
): Promise<EncodedSet> {
  const ids: string[] = [];
  const rows: Float32Array[] = [];
  for (let start = 0; start < items.length; start += batchSize) {
    const batch = items.slice(start, start + batchSize);
    try {
      const encoded = await encoder.encode(batch.map((item) => item.text));
      batch.forEach((item, i) => {
        ids.push(item.id);
        rows.push(encoded[i]!);
      });
    } catch (err) {
      if (!(err instanceof EncodeError)) throw err;
      for (const item of batch) {
        try {
          const [row] = await encoder.encode([item.text]);
          ids.push(item.id);
          rows.push(row!);
        } catch (itemErr) {
          if (!(itemErr instanceof EncodeError)) throw itemErr;
          failures.push({ id: item.id, stage, error: itemErr.message });
        }
      }
    }
  }
  return { ids, rows };
}

function dropFailed(items: TextItem[], failures: ExportFailure[]): TextItem[] {
  if (failures.length === 0) return items;
  const failed = new Set(failures.map((f) => f.id));
  return items.filter((item) => !failed.has(item.id));
}

export async function exportEmbeddings(req: ExportRequest): Promise<ExportResult> {
  const split = req.split ?? "test";
  const batchSize = req.batchSize ?? 64;
  const normalize = req.normalize ?? true;
  const maxItems = req.maxItems ?? null;
  const maxQueries = req.maxQueries ?? null;
  const serverModel = req.serverModel ?? null;

  const data = loadDataset(req.dataset, split);
  const sampled = subsample(data, maxItems, maxQueries);

  const local = resolveEncoder(req.model, normalize);
  const server = serverModel === null ? null : resolveEncoder(serverModel, normalize);

  const failures: ExportFailure[] = [];
  const outputs: Record<string, string> = {};
  const out = (name: string) => path.join(req.outDir, name);

  // encode with the local model first; rows that fail are dropped for every
  // model so paired files stay aligned row for row
  let corpusItems = sampled.corpus;
  let queryItems = sampled.queries;
  const corpusLocal = await encodeItems(local, corpusItems, batchSize, "corpus", failures);
  const queriesLocal = await encodeItems(local, queryItems, batchSize, "queries", failures);
  corpusItems = dropFailed(corpusItems, failures);
  queryItems = dropFailed(queryItems, failures);

  if (server === null) {
    writeEmb(out("corpus.emb"), corpusLocal.rows, corpusLocal.ids);
    writeEmb(out("queries.emb"), queriesLocal.rows, queriesLocal.ids);
    outputs["corpus"] = out("corpus.emb");
    outputs["queries"] = out("queries.emb");
  } else {
    const corpusServer = await encodeItems(server, corpusItems, batchSize, "corpus", failures);
    const queriesServer = await encodeItems(server, queryItems, batchSize, "queries", failures);
    // a server-side failure shrinks the local files too
    const keptCorpus = new Set(corpusServer.ids);
    const keptQueries = new Set(queriesServer.ids);
    const filterTo = (set: EncodedSet, keep: Set<string>): EncodedSet => ({
      ids: set.ids.filter((id) => keep.has(id)),
      rows: set.rows.filter((_, i) => keep.has(set.ids[i]!)),
    });
    const corpusLocalKept = filterTo(corpusLocal, keptCorpus);
    const queriesLocalKept = filterTo(queriesLocal, keptQueries);

    writeEmb(out("corpus.local.emb"), corpusLocalKept.rows, corpusLocalKept.ids);
    writeEmb(out("corpus.server.emb"), corpusServer.rows, corpusServer.ids);
    writeEmb(out("queries.local.emb"), queriesLocalKept.rows, queriesLocalKept.ids);
    writeEmb(out("queries.server.emb"), queriesServer.rows, queriesServer.ids);
    outputs["corpusLocal"] = out("corpus.local.emb");
    outputs["corpusServer"] = out("corpus.server.emb");
    outputs["queriesLocal"] = out("queries.local.emb");
    outputs["queriesServer"] = out("queries.server.emb");
    corpusItems = dropFailed(corpusItems, failures);
    queryItems = dropFailed(queryItems, failures);
  }

  const finalCorpusIds = new Set(corpusItems.map((d) => d.id));
  const finalQueryIds = new Set(queryItems.map((q) => q.id));
  const qrels = sampled.qrels.filter(
    (e) => finalQueryIds.has(e.queryId) && finalCorpusIds.has(e.docId),
  );
  writeQrels(out("qrels.tsv"), qrels);
  outputs["qrels"] = out("qrels.tsv");

  const manifest: ExportManifest = {
    formatVersion: 1,
    model: req.model,
    serverModel,
    dataset: data.name,
    datasetPath: path.resolve(req.dataset),
    split,
    maxItems,
    maxQueries,
    batchSize,
    normalize,
    outputs,
    stats: {
      corpusEmitted: corpusItems.length,
      queriesEmitted: queryItems.length,
      qrelsEmitted: qrels.length,
      qrelsDropped: sampled.qrelsDropped + (sampled.qrels.length - qrels.length),
    },
    failures,
    partial: failures.length > 0,
    createdAt: new Date().toISOString(),
  };
  const manifestPath = out("manifest.json");
  writeManifest(manifestPath, manifest);
  return { manifest, manifestPath };
}
