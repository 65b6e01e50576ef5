export { loadDataset, subsample, DatasetError } from "./dataset.js";
export type { Dataset, TextItem, SubsampleResult } from "./dataset.js";
export { HashedEncoder, resolveEncoder, EncodeError, ModelUnavailableError } from "./encoders.js";
export type { Encoder } from "./encoders.js";
export { exportEmbeddings } from "./exporter.js";
export type { ExportRequest, ExportResult, ExportFailure } from "./exporter.js";
export { readEmb, writeEmb, writeQrels, embRow, idsPath, FormatError, EMB_MAGIC, EMB_VERSION } from "./formats.js";
export type { EmbFile, QrelEntry } from "./formats.js";
export { readManifest, writeManifest, manifestSchema } from "./manifest.js";
export type { ExportManifest } from "./manifest.js";
