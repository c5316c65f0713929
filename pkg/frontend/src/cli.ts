#!/usr/bin/env node
// render --kind crit-fit --in fe.csv --crit crit.json --constants pq.json \
//        --out fig.svg
// Exit codes: 0 drawn, 2 usage or input-contract errors, 1 anything else.
// crit-fit prints the fitted exponent and amplitude with standard errors to
// stdout so CI can assert on numbers without parsing the image.

import { parseArgs } from "node:util";
import { render, InputError, SchemaError } from "./render.js";
import { KINDS, type Kind } from "./schema.js";

const USAGE =
  "usage: render --kind <fe-curve|crit-fit|plateau|ks|contact-tail> " +
  "--in <file> [--in <file> ...] --out <fig.svg> " +
  "[--crit <crit.json>] [--constants <pq.json>] [--title <text>]";

export function run(argv: string[]): number {
  let values;
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        kind: { type: "string" },
        in: { type: "string", multiple: true },
        out: { type: "string" },
        crit: { type: "string" },
        constants: { type: "string" },
        title: { type: "string" },
      },
      strict: true,
    }));
  } catch (err) {
    process.stderr.write(`render: ${(err as Error).message}\n${USAGE}\n`);
    return 2;
  }
  const kind = values.kind as Kind | undefined;
  if (kind && !KINDS.includes(kind)) {
    process.stderr.write(`render: unknown kind "${kind}"\n${USAGE}\n`);
    return 2;
  }
  if (!kind || !values.in?.length || !values.out) {
    process.stderr.write(`render: --kind, --in and --out are required\n${USAGE}\n`);
    return 2;
  }
  try {
    const result = render({
      kind,
      inputs: values.in,
      out: values.out,
      title: values.title,
      crit: values.crit,
      constants: values.constants,
    });
    if (result.fit) {
      const f = result.fit;
      process.stdout.write(
        `exponent ${f.exponent.toPrecision(12)} stderr ${f.exponentStderr.toPrecision(6)}\n` +
          `amplitude ${f.amplitude.toPrecision(12)} stderr ${f.amplitudeStderr.toPrecision(6)}\n`,
      );
    }
    process.stderr.write(`wrote ${result.out}\n`);
    return 0;
  } catch (err) {
    process.stderr.write(`render: ${(err as Error).message}\n`);
    return err instanceof InputError || err instanceof SchemaError ? 2 : 1;
  }
}

process.exit(run(process.argv.slice(2)));
