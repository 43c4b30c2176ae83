/**
 * Frozen text encoders, pluggable by model id.
 *
 * The built-in family is "hashed-ngram-<dim>": word unigrams plus character
 * trigrams, signed feature hashing into <dim> buckets, L2-normalized. It is
 * fully deterministic (no external weights), so the same text always maps to
 * the same vector on every machine.
 */

export interface EmbeddingProvider {
    readonly modelId: string;
    readonly dimension: number;
    embedBatch(texts: string[]): Promise<Float32Array[]>;
}

/** 32-bit FNV-1a over a UTF-16 code-unit stream. */
function fnv1a(text: string, seed: number): number {
    let hash = (0x811c9dc5 ^ seed) >>> 0;
    for (let i = 0; i < text.length; i++) {
        hash ^= text.charCodeAt(i);
        hash = Math.imul(hash, 0x01000193) >>> 0;
    }
    return hash >>> 0;
}

function* features(text: string): Generator<string> {
    const normalized = text.toLowerCase();
    for (const word of normalized.split(/[^\p{L}\p{N}]+/u)) {
        if (word.length > 0) yield `w:${word}`;
    }
    const squashed = normalized.replace(/\s+/g, " ");
    for (let i = 0; i + 3 <= squashed.length; i++) {
        yield `g:${squashed.slice(i, i + 3)}`;
    }
}

export class HashedNgramEncoder implements EmbeddingProvider {
    readonly modelId: string;
    readonly dimension: number;

    constructor(dimension: number) {
        if (!Number.isInteger(dimension) || dimension <= 0) {
            throw new Error(`encoder load failure: dimension must be a positive integer, got ${dimension}`);
        }
        this.dimension = dimension;
        this.modelId = `hashed-ngram-${dimension}`;
    }

    embed(text: string): Float32Array {
        const acc = new Float64Array(this.dimension);
        for (const feature of features(text)) {
            const bucket = fnv1a(feature, 0) % this.dimension;
            const sign = (fnv1a(feature, 0x9e3779b9) & 1) === 0 ? 1 : -1;
            acc[bucket] += sign;
        }
        let norm = 0;
        for (const v of acc) norm += v * v;
        norm = Math.sqrt(norm);
        const out = new Float32Array(this.dimension);
        if (norm > 0) {
            for (let i = 0; i < this.dimension; i++) out[i] = Math.fround(acc[i] / norm);
        }
        return out; // empty/feature-less text stays the zero vector
    }

    async embedBatch(texts: string[]): Promise<Float32Array[]> {
        return texts.map((t) => this.embed(t));
    }
}

const HASHED_NGRAM = /^hashed-ngram-(\d+)$/;

/** Resolve a provider from its identifier; throws on unknown ids. */
export function createProvider(modelId: string): EmbeddingProvider {
    const match = HASHED_NGRAM.exec(modelId);
    if (!match) {
        throw new Error(
            `encoder load failure: unknown model id "${modelId}" (expected hashed-ngram-<dim>)`);
    }
    return new HashedNgramEncoder(parseInt(match[1], 10));
}
