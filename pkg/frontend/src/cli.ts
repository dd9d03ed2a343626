#!/usr/bin/env node
/** plotkit render --spec fig.json --out fig.png */

import { renderFromFile } from "./render.js";

function usage(): never {
  console.error("usage: plotkit render --spec <fig.json> --out <fig.png|fig.svg>");
  process.exit(1);
}

export function main(argv: string[]): number {
  if (argv[0] !== "render") usage();
  let spec: string | undefined;
  let out: string | undefined;
  for (let i = 1; i < argv.length; i += 2) {
    if (argv[i] === "--spec") spec = argv[i + 1];
    else if (argv[i] === "--out") out = argv[i + 1];
    else usage();
  }
  if (!spec || !out) usage();
  try {
    const result = renderFromFile(spec, out);
    console.log(`plotkit: wrote ${result.image} and ${result.slopes}`);
    return 0;
  } catch (err) {
    console.error(`plotkit error: ${(err as Error).message}`);
    return 1;
  }
}

const invoked = process.argv[1] ?? "";
if (invoked.endsWith("cli.js") || invoked.endsWith("plotkit")) {
  process.exit(main(process.argv.slice(2)));
}
