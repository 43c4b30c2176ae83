/**
 * Batch-encode an id+text JSONL file into the engine's tasks format, or a
 * strategy-description file into its strategies format. Record order is
 * preserved and the embedding dimension is constant across a job.
 */

import * as fs from "node:fs";
import * as path from "node:path";
import * as readline from "node:readline";

import { createProvider, EmbeddingProvider } from "./embedding.js";
import { strategyLine, taskLine } from "./formats.js";

export type EncodeKind = "tasks" | "strategies";

export interface EncodeJob {
    inputPath: string;
    outputPath: string;
    modelId: string;
    batchSize: number;
    kind: EncodeKind;
}

export interface EncodeResult {
    records: number;
    dimension: number;
    modelId: string;
    outputPath: string;
    emptyTexts: number;
}

interface RawRecord {
    lineNumber: number;
    value: Record<string, unknown>;
}

async function readJsonl(inputPath: string): Promise<RawRecord[]> {
    const records: RawRecord[] = [];
    const reader = readline.createInterface({
        input: fs.createReadStream(inputPath, { encoding: "utf-8" }),
        crlfDelay: Infinity,
    });
    let lineNumber = 0;
    for await (const raw of reader) {
        lineNumber++;
        const line = raw.trim();
        if (!line) continue;
        let value: unknown;
        try {
            value = JSON.parse(line);
        } catch (err) {
            throw new Error(`${inputPath}:${lineNumber}: malformed JSON (${(err as Error).message})`);
        }
        if (typeof value !== "object" || value === null || Array.isArray(value)) {
            throw new Error(`${inputPath}:${lineNumber}: expected a JSON object`);
        }
        records.push({ lineNumber, value: value as Record<string, unknown> });
    }
    return records;
}

function requireString(record: RawRecord, keys: string[], inputPath: string): string {
    for (const key of keys) {
        const v = record.value[key];
        if (typeof v === "string") return v;
    }
    throw new Error(`${inputPath}:${record.lineNumber}: missing string field (${keys.join(" or ")})`);
}

async function embedAll(provider: EmbeddingProvider, texts: string[],
                        batchSize: number): Promise<Float32Array[]> {
    const out: Float32Array[] = [];
    for (let start = 0; start < texts.length; start += batchSize) {
        const batch = texts.slice(start, start + batchSize);
        const vectors = await provider.embedBatch(batch);
        if (vectors.length !== batch.length) {
            throw new Error(`encoder returned ${vectors.length} vectors for a batch of ${batch.length}`);
        }
        for (const v of vectors) {
            if (v.length !== provider.dimension) {
                throw new Error(`encoder emitted dimension ${v.length}, expected ${provider.dimension}`);
            }
            out.push(v);
        }
    }
    return out;
}

export async function encodeFile(job: EncodeJob): Promise<EncodeResult> {
    if (!Number.isInteger(job.batchSize) || job.batchSize <= 0) {
        throw new Error(`batch size must be a positive integer, got ${job.batchSize}`);
    }
    const provider = createProvider(job.modelId);
    const records = await readJsonl(job.inputPath);
    let emptyTexts = 0;
    const lines: string[] = [];

    if (job.kind === "tasks") {
        const ids: string[] = [];
        const texts: string[] = [];
        for (const record of records) {
            ids.push(requireString(record, ["id", "task_id"], job.inputPath));
            texts.push(requireString(record, ["text"], job.inputPath));
        }
        for (let i = 0; i < texts.length; i++) {
            if (texts[i].trim() === "") {
                emptyTexts++;
                console.warn(`warning: empty text for id "${ids[i]}"; encoding as-is`);
            }
        }
        const vectors = await embedAll(provider, texts, job.batchSize);
        for (let i = 0; i < ids.length; i++) {
            lines.push(taskLine(ids[i], texts[i], vectors[i]));
        }
    } else {
        const texts: string[] = [];
        for (const record of records) {
            texts.push(requireString(record, ["model_desc"], job.inputPath));
            texts.push(requireString(record, ["decoding_desc"], job.inputPath));
        }
        for (const text of texts) {
            if (text.trim() === "") emptyTexts++;
        }
        const vectors = await embedAll(provider, texts, job.batchSize);
        records.forEach((record, i) => {
            const paramCount = record.value["param_count"];
            if (typeof paramCount !== "number" || !Number.isInteger(paramCount) || paramCount <= 0) {
                throw new Error(`${job.inputPath}:${record.lineNumber}: param_count must be a positive integer`);
            }
            lines.push(strategyLine({
                strategy_id: requireString(record, ["strategy_id", "id"], job.inputPath),
                model_id: requireString(record, ["model_id"], job.inputPath),
                decoding_id: requireString(record, ["decoding_id"], job.inputPath),
                param_count: paramCount,
                modelDesc: vectors[2 * i],
                decodingDesc: vectors[2 * i + 1],
            }));
        });
    }

    fs.mkdirSync(path.dirname(path.resolve(job.outputPath)), { recursive: true });
    fs.writeFileSync(job.outputPath, lines.map((l) => l + "\n").join(""), "utf-8");
    return {
        records: records.length,
        dimension: provider.dimension,
        modelId: provider.modelId,
        outputPath: job.outputPath,
        emptyTexts,
    };
}
