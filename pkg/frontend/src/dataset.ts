/**
 * BEIR-layout dataset loading.
 *
 * A dataset directory holds `corpus.jsonl` ({_id, title?, text}),
 * `queries.jsonl` ({_id, text}) and `qrels/<split>.tsv` (three tab-separated
 * columns, optional `query-id  corpus-id  score` header line). That is the
 * layout BEIR archives unpack to, so a downloaded benchmark directory works
 * unmodified as `--dataset`.
 */

import fs from "node:fs";
import path from "node:path";

import { z } from "zod";

import type { QrelEntry } from "./formats.js";

export class DatasetError extends Error {
  readonly code = "dataset";
  constructor(message: string) {
    super(message);
    this.name = "DatasetError";
  }
}

export interface TextItem {
  id: string;
  text: string;
}

export interface Dataset {
  name: string;
  dir: string;
  split: string;
  corpus: TextItem[];
  queries: TextItem[];
  qrels: QrelEntry[];
}

const corpusRow = z.object({ _id: z.coerce.string(), title: z.string().optional(), text: z.string() });
const queryRow = z.object({ _id: z.coerce.string(), text: z.string() });

function readJsonl<T>(filePath: string, schema: z.ZodType<T>): T[] {
  let raw: string;
  try {
    raw = fs.readFileSync(filePath, "utf-8");
  } catch {
    throw new DatasetError(`cannot read ${filePath}`);
  }
  const rows: T[] = [];
  raw.split("\n").forEach((line, i) => {
    if (!line.trim()) return;
    let parsed: unknown;
    try {
      parsed = JSON.parse(line);
    } catch {
      throw new DatasetError(`${filePath}:${i + 1}: not valid JSON`);
    }
    const result = schema.safeParse(parsed);
    if (!result.success) {
      throw new DatasetError(`${filePath}:${i + 1}: ${result.error.issues[0]?.message}`);
    }
    rows.push(result.data);
  });
  if (rows.length === 0) {
    throw new DatasetError(`${filePath}: no rows`);
  }
  return rows;
}

function readQrelsTsv(filePath: string): QrelEntry[] {
  let raw: string;
  try {
    raw = fs.readFileSync(filePath, "utf-8");
  } catch {
    throw new DatasetError(`cannot read ${filePath}`);
  }
  const entries: QrelEntry[] = [];
  raw.split("\n").forEach((line, i) => {
    const trimmed = line.replace(/\r$/, "");
    if (!trimmed.trim()) return;
    const fields = trimmed.split("\t");
    if (i === 0 && fields[0] === "query-id") return; // BEIR header line
    if (fields.length !== 3) {
      throw new DatasetError(`${filePath}:${i + 1}: expected 3 tab-separated fields, got ${fields.length}`);
    }
    const score = Number(fields[2]);
    if (!Number.isFinite(score)) {
      throw new DatasetError(`${filePath}:${i + 1}: score ${JSON.stringify(fields[2])} is not a number`);
    }
    entries.push({ queryId: fields[0]!, docId: fields[1]!, relevance: score });
  });
  if (entries.length === 0) {
    throw new DatasetError(`${filePath}: no judgments`);
  }
  return entries;
}

/** BEIR convention: the title is part of the passage text. */
export function corpusText(row: { title?: string; text: string }): string {
  return row.title ? `${row.title} ${row.text}` : row.text;
}

export function loadDataset(dir: string, split: string): Dataset {
  if (!fs.existsSync(dir) || !fs.statSync(dir).isDirectory()) {
    throw new DatasetError(
      `dataset directory ${dir} not found; point --dataset at an unpacked BEIR-layout directory`,
    );
  }
  const corpus = readJsonl(path.join(dir, "corpus.jsonl"), corpusRow).map((row) => ({
    id: row._id,
    text: corpusText(row),
  }));
  const queries = readJsonl(path.join(dir, "queries.jsonl"), queryRow).map((row) => ({
    id: row._id,
    text: row.text,
  }));
  const qrels = readQrelsTsv(path.join(dir, "qrels", `${split}.tsv`));

  const corpusIds = new Set(corpus.map((d) => d.id));
  const queryIds = new Set(queries.map((q) => q.id));
  for (const entry of qrels) {
    if (!queryIds.has(entry.queryId)) {
      throw new DatasetError(`qrels reference unknown query ${entry.queryId}`);
    }
    if (!corpusIds.has(entry.docId)) {
      throw new DatasetError(`qrels reference unknown doc ${entry.docId}`);
    }
  }
  return { name: path.basename(path.resolve(dir)), dir, split, corpus, queries, qrels };
}

export interface SubsampleResult {
  corpus: TextItem[];
  queries: TextItem[];
  qrels: QrelEntry[];
  /** Judgments not emitted because their query fell outside the query cap. */
  qrelsDropped: number;
}

/**
 * Cap the corpus at `maxItems` docs while keeping judged docs of the kept
 * queries, so planted ground truth stays retrievable. Original corpus order
 * is preserved; `maxQueries` caps the query list (and with it the qrels).
 */
export function subsample(data: Dataset, maxItems: number | null, maxQueries: number | null): SubsampleResult {
  const queries = maxQueries === null ? data.queries : data.queries.slice(0, maxQueries);
  const queryIds = new Set(queries.map((q) => q.id));
  const keptQrels = data.qrels.filter((e) => queryIds.has(e.queryId));

  let corpus = data.corpus;
  if (maxItems !== null && maxItems < corpus.length) {
    const judged = new Set(keptQrels.map((e) => e.docId));
    const kept = new Set<string>();
    for (const doc of corpus) {
      if (kept.size >= maxItems) break;
      kept.add(doc.id);
    }
    for (const id of judged) kept.add(id);
    corpus = corpus.filter((doc) => kept.has(doc.id));
  }

  const corpusIds = new Set(corpus.map((d) => d.id));
  const qrels = keptQrels.filter((e) => corpusIds.has(e.docId));
  return { corpus, queries, qrels, qrelsDropped: data.qrels.length - qrels.length };
}
