import fs from "node:fs";
import path from "node:path";

export interface MiniDatasetOptions {
  docs?: number;
  queries?: number;
  /** Give this doc id punctuation-only content so encoding it fails. */
  breakDoc?: string;
}

/**
 * Write a small BEIR-layout dataset: every query q<t> is about "topic<t>" and
 * its two relevant docs share that topic's vocabulary, so token-based
 * encoders put them near each other.
 */
export function makeMiniDataset(dir: string, opts: MiniDatasetOptions = {}): void {
  const docCount = opts.docs ?? 30;
  const queryCount = opts.queries ?? 5;
  const words = ["alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta"];

  const corpusLines: string[] = [];
  for (let i = 0; i < docCount; i++) {
    const id = `d${String(i).padStart(3, "0")}`;
    const topic = i % queryCount;
    const filler = words[i % words.length];
    const base =
      i < queryCount * 2
        ? `topic${topic} ${words[topic % words.length]} ${words[(topic + 1) % words.length]} notes`
        : `misc ${filler} ${words[(i + 3) % words.length]} item number ${i}`;
    if (opts.breakDoc === id) {
      corpusLines.push(JSON.stringify({ _id: id, text: "?!... ---" }));
    } else {
      corpusLines.push(JSON.stringify({ _id: id, title: `Doc ${i}`, text: base }));
    }
  }

  const queryLines: string[] = [];
  const qrelLines: string[] = ["query-id\tcorpus-id\tscore"];
  for (let t = 0; t < queryCount; t++) {
    const qid = `q${t}`;
    queryLines.push(
      JSON.stringify({ _id: qid, text: `topic${t} ${words[t % words.length]} ${words[(t + 1) % words.length]}` }),
    );
    // docs t and t+queryCount carry this topic's vocabulary
    qrelLines.push(`${qid}\td${String(t).padStart(3, "0")}\t1`);
    qrelLines.push(`${qid}\td${String(t + queryCount).padStart(3, "0")}\t1`);
  }

  fs.mkdirSync(path.join(dir, "qrels"), { recursive: true });
  fs.writeFileSync(path.join(dir, "corpus.jsonl"), corpusLines.join("\n") + "\n");
  fs.writeFileSync(path.join(dir, "queries.jsonl"), queryLines.join("\n") + "\n");
  fs.writeFileSync(path.join(dir, "qrels", "test.tsv"), qrelLines.join("\n") + "\n");
}
