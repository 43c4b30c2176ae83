/**
 * CLI: encode --in <jsonl> --out <jsonl> --model <id> --batch <n> [--kind tasks|strategies]
 */

import { pathToFileURL } from "node:url";

import { EncodeKind, encodeFile } from "./encode.js";

const USAGE =
    "Usage: encoder-bridge encode --in <jsonl> --out <jsonl> --model <id> --batch <n> [--kind tasks|strategies]\n" +
    "  model ids: hashed-ngram-<dim> (e.g. hashed-ngram-768)";

function parseFlags(argv: string[]): Map<string, string> {
    const flags = new Map<string, string>();
    for (let i = 0; i < argv.length; i += 2) {
        const key = argv[i];
        const value = argv[i + 1];
        if (!key.startsWith("--") || value === undefined) {
            throw new Error(`bad argument "${key}"`);
        }
        flags.set(key.slice(2), value);
    }
    return flags;
}

export async function main(argv: string[]): Promise<number> {
    if (argv[0] !== "encode") {
        console.error(USAGE);
        return 2;
    }
    let flags: Map<string, string>;
    try {
        flags = parseFlags(argv.slice(1));
    } catch (err) {
        console.error(`${(err as Error).message}\n${USAGE}`);
        return 2;
    }
    const input = flags.get("in");
    const output = flags.get("out");
    if (!input || !output) {
        console.error(USAGE);
        return 2;
    }
    const kind = (flags.get("kind") ?? "tasks") as EncodeKind;
    if (kind !== "tasks" && kind !== "strategies") {
        console.error(`unknown --kind "${kind}"\n${USAGE}`);
        return 2;
    }
    try {
        const result = await encodeFile({
            inputPath: input,
            outputPath: output,
            modelId: flags.get("model") ?? "hashed-ngram-768",
            batchSize: parseInt(flags.get("batch") ?? "32", 10),
            kind,
        });
        console.log(JSON.stringify(result));
        return 0;
    } catch (err) {
        console.error(`encode failed: ${(err as Error).message}`);
        return 1;
    }
}

if (import.meta.url === pathToFileURL(process.argv[1]).href) {
    main(process.argv.slice(2)).then((code) => process.exit(code));
}
