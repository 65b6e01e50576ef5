#!/usr/bin/env node
/**
 * steer-export: encode a BEIR-layout dataset into steer embedding files.
 *
 * Exit codes: 0 clean export, 1 partial export (some items failed to encode),
 * 2 bad input (arguments, dataset, unavailable model).
 */

import fs from "node:fs";
import process from "node:process";
import { pathToFileURL } from "node:url";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { DatasetError } from "./dataset.js";
import { ModelUnavailableError } from "./encoders.js";
import { exportEmbeddings } from "./exporter.js";
import { FormatError } from "./formats.js";

export async function main(argv: string[]): Promise<number> {
  const args = await yargs(argv)
    .scriptName("steer-export")
    .usage("$0 --model <name> --dataset <dir> --out <dir>")
    .option("model", {
      type: "string",
      demandOption: true,
      describe: "encoder for the local space (hashed:<dim> or a transformer model id)",
    })
    .option("server-model", {
      type: "string",
      describe: "also encode the server space, emitting paired files for steer align",
    })
    .option("dataset", {
      type: "string",
      demandOption: true,
      describe: "BEIR-layout dataset directory",
    })
    .option("split", { type: "string", default: "test", describe: "qrels split name" })
    .option("limit", { type: "number", describe: "cap the corpus at n docs (judged docs are kept)" })
    .option("max-queries", { type: "number", describe: "cap the query list at n" })
    .option("batch-size", { type: "number", default: 64 })
    .option("normalize", { type: "boolean", default: true, describe: "L2-normalize embeddings" })
    .option("out", { type: "string", demandOption: true, describe: "output directory" })
    .strict()
    .fail((msg, err) => {
      throw err ?? new Error(msg);
    })
    .parse();

  const result = await exportEmbeddings({
    model: args.model,
    serverModel: args.serverModel ?? null,
    dataset: args.dataset,
    split: args.split,
    maxItems: args.limit ?? null,
    maxQueries: args.maxQueries ?? null,
    batchSize: args.batchSize,
    normalize: args.normalize,
    outDir: args.out,
  });

  const { stats, failures, outputs } = result.manifest;
  console.log(
    `exported ${stats.corpusEmitted} corpus docs, ${stats.queriesEmitted} queries, ` +
      `${stats.qrelsEmitted} judgments -> ${result.manifestPath}`,
  );
  for (const [name, file] of Object.entries(outputs)) {
    console.log(`  ${name}: ${file}`);
  }
  if (failures.length > 0) {
    for (const failure of failures) {
      console.error(`encode failure (${failure.stage} ${failure.id}): ${failure.error}`);
    }
    console.error(`partial export: ${failures.length} item(s) skipped`);
    return 1;
  }
  return 0;
}

const invokedPath = process.argv[1];
const isDirectRun =
  invokedPath !== undefined &&
  fs.existsSync(invokedPath) &&
  import.meta.url === pathToFileURL(fs.realpathSync(invokedPath)).href;
if (isDirectRun) {
  main(hideBin(process.argv))
    .then((code) => process.exit(code))
    .catch((err) => {
      if (err instanceof DatasetError || err instanceof ModelUnavailableError || err instanceof FormatError) {
        console.error(`error (${err.code}): ${err.message}`);
      } else {
        console.error(`error: ${err?.message ?? err}`);
      }
      process.exit(2);
    });
}
