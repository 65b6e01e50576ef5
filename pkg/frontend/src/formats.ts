/**
 * Binary embedding files and qrels TSV, matching the steer toolkit byte for
 * byte so exported files feed `steer align` / `steer search` directly.
 *
 * EmbFile layout: 8-byte ASCII magic "STEERV1\0", then little-endian
 * u32 version (1), u32 dim, u64 count, then count*dim float32 row-major.
 * Row ids live in a UTF-8 sidecar at `<path>.ids`, one id per line.
 */

import fs from "node:fs";
import path from "node:path";
import process from "node:process";

export const EMB_MAGIC = "STEERV1\0";
export const EMB_VERSION = 1;
const HEADER_BYTES = 24;

/** Error with a stable machine-readable code, mirroring the toolkit taxonomy. */
export class FormatError extends Error {
  constructor(public readonly code: string, message: string) {
    super(message);
    this.name = "FormatError";
  }
}

export interface EmbFile {
  dim: number;
  count: number;
  ids: string[];
  /** Flat row-major payload, count*dim floats. */
  data: Float32Array;
}

export function idsPath(embPath: string): string {
  return `${embPath}.ids`;
}

/** Write bytes to a temp file in the destination directory, then rename. */
function atomicWrite(filePath: string, data: Buffer | string): void {
  fs.mkdirSync(path.dirname(filePath), { recursive: true });
  const tmp = `${filePath}.${process.pid}.${Date.now()}.tmp`;
  try {
    fs.writeFileSync(tmp, data);
    fs.renameSync(tmp, filePath);
  } catch (err) {
    fs.rmSync(tmp, { force: true });
    throw err;
  }
}

const HOST_LE = new Uint8Array(new Uint32Array([1]).buffer)[0] === 1;

function payloadToBuffer(rows: Float32Array[], dim: number): Buffer {
  const flat = new Float32Array(rows.length * dim);
  rows.forEach((row, i) => {
    if (row.length !== dim) {
      throw new FormatError("dimension-mismatch", `row ${i} has dim ${row.length}, expected ${dim}`);
    }
    flat.set(row, i * dim);
  });
  if (HOST_LE) {
    return Buffer.from(flat.buffer, flat.byteOffset, flat.byteLength);
  }
  const view = new DataView(new ArrayBuffer(flat.byteLength));
  flat.forEach((v, i) => view.setFloat32(i * 4, v, true));
  return Buffer.from(view.buffer);
}

export function writeEmb(filePath: string, rows: Float32Array[], ids: string[]): void {
  if (rows.length !== ids.length) {
    throw new FormatError("id-count-mismatch", `${ids.length} ids for ${rows.length} rows`);
  }
  if (rows.length === 0) {
    throw new FormatError("input", "refusing to write an empty embedding file");
  }
  for (const id of ids) {
    if (!id || /[\r\n]/.test(id)) {
      throw new FormatError("input", `id ${JSON.stringify(id)} is empty or contains a line break`);
    }
  }
  const dim = rows[0]!.length;
  const header = Buffer.alloc(HEADER_BYTES);
  header.write(EMB_MAGIC, 0, "latin1");
  header.writeUInt32LE(EMB_VERSION, 8);
  header.writeUInt32LE(dim, 12);
  header.writeBigUInt64LE(BigInt(rows.length), 16);
  atomicWrite(filePath, Buffer.concat([header, payloadToBuffer(rows, dim)]));
  atomicWrite(idsPath(filePath), ids.join("\n") + "\n");
}

export function readEmb(filePath: string): EmbFile {
  const blob = fs.readFileSync(filePath);
  if (blob.length < HEADER_BYTES) {
    throw new FormatError(
      "truncated-payload",
      `${filePath}: ${blob.length} bytes is shorter than the ${HEADER_BYTES}-byte header`,
    );
  }
  const magic = blob.toString("latin1", 0, 8);
  if (magic !== EMB_MAGIC) {
    throw new FormatError("bad-magic", `${filePath}: bad magic ${JSON.stringify(magic)}`);
  }
  const version = blob.readUInt32LE(8);
  if (version !== EMB_VERSION) {
    throw new FormatError("version-mismatch", `${filePath}: version ${version}, expected ${EMB_VERSION}`);
  }
  const dim = blob.readUInt32LE(12);
  const count = Number(blob.readBigUInt64LE(16));
  const expected = count * dim * 4;
  if (blob.length - HEADER_BYTES !== expected) {
    throw new FormatError(
      "truncated-payload",
      `${filePath}: payload holds ${blob.length - HEADER_BYTES} bytes, header declares ${expected}`,
    );
  }
  let data: Float32Array;
  if (HOST_LE) {
    // copy out of the Buffer pool so the view owns aligned memory
    const payload = Buffer.alloc(expected);
    blob.copy(payload, 0, HEADER_BYTES);
    data = new Float32Array(payload.buffer, payload.byteOffset, count * dim);
  } else {
    data = new Float32Array(count * dim);
    for (let i = 0; i < data.length; i++) {
      data[i] = blob.readFloatLE(HEADER_BYTES + i * 4);
    }
  }

  const sidecar = idsPath(filePath);
  if (!fs.existsSync(sidecar)) {
    throw new FormatError("file-format", `${filePath}: ids sidecar ${sidecar} is missing`);
  }
  const text = fs.readFileSync(sidecar, "utf-8");
  const ids = text.split("\n");
  if (ids[ids.length - 1] === "") ids.pop();
  if (ids.length !== count) {
    throw new FormatError("id-count-mismatch", `${sidecar}: ${ids.length} ids for ${count} vectors`);
  }
  if (ids.some((id) => id.length === 0)) {
    throw new FormatError("file-format", `${sidecar}: contains an empty id line`);
  }
  return { dim, count, ids, data };
}

export function embRow(file: EmbFile, index: number): Float32Array {
  return file.data.subarray(index * file.dim, (index + 1) * file.dim);
}

export interface QrelEntry {
  queryId: string;
  docId: string;
  relevance: number;
}

/** Write `query_id<TAB>doc_id<TAB>relevance` lines, one judgment per line. */
export function writeQrels(filePath: string, entries: QrelEntry[]): void {
  if (entries.length === 0) {
    throw new FormatError("input", "refusing to write an empty qrels file");
  }
  const lines = entries.map((e) => {
    if (!e.queryId || !e.docId) {
      throw new FormatError("input", `qrels entry has an empty id: ${JSON.stringify(e)}`);
    }
    return `${e.queryId}\t${e.docId}\t${e.relevance}`;
  });
  atomicWrite(filePath, lines.join("\n") + "\n");
}
