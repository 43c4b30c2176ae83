/**
 * Serialization helpers for the routing engine's JSONL file formats.
 *
 * Embeddings are written as the exact double value of each 32-bit float
 * (Math.fround), so JSON.stringify emits decimal literals that re-parse to
 * identical float32 bits on the consumer side.
 */

export function float32Literals(vector: ArrayLike<number>): number[] {
    const out = new Array<number>(vector.length);
    for (let i = 0; i < vector.length; i++) {
        const v = Math.fround(vector[i]);
        if (!Number.isFinite(v)) {
            throw new Error(`non-finite embedding component at index ${i}`);
        }
        out[i] = v;
    }
    return out;
}

export interface TaskRecord {
    task_id: string;
    text: string;
    embedding: number[];
}

export interface StrategyRecord {
    strategy_id: string;
    model_id: string;
    decoding_id: string;
    param_count: number;
    model_desc_embedding: number[];
    decoding_desc_embedding: number[];
}

export function taskLine(taskId: string, text: string, embedding: Float32Array): string {
    const record: TaskRecord = { task_id: taskId, text, embedding: float32Literals(embedding) };
    return JSON.stringify(record);
}

export function strategyLine(fields: {
    strategy_id: string;
    model_id: string;
    decoding_id: string;
    param_count: number;
    modelDesc: Float32Array;
    decodingDesc: Float32Array;
}): string {
    const record: StrategyRecord = {
        strategy_id: fields.strategy_id,
        model_id: fields.model_id,
        decoding_id: fields.decoding_id,
        param_count: fields.param_count,
        model_desc_embedding: float32Literals(fields.modelDesc),
        decoding_desc_embedding: float32Literals(fields.decodingDesc),
    };
    return JSON.stringify(record);
}
