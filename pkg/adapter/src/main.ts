import { serve } from "./adapter.js";

function usage(): never {
  console.error("usage: node dist/main.js <run-dir> [--poll ms] [--timeout s]");
  process.exit(2);
}

async function main(): Promise<void> {
  const args = process.argv.slice(2);
  let runDir: string | undefined;
  let pollMs = 25;
  let timeoutMs = 120_000;
  for (let i = 0; i < args.length; i++) {
    if (args[i] === "--poll") pollMs = Number(args[++i]);
    else if (args[i] === "--timeout") timeoutMs = Number(args[++i]) * 1000;
    else if (!runDir) runDir = args[i];
    else usage();
  }
  if (!runDir || !Number.isFinite(pollMs) || !Number.isFinite(timeoutMs)) usage();
  const code = await serve(runDir, { pollMs, timeoutMs });
  process.exit(code);
}

main().catch((err) => {
  console.error(String(err));
  process.exit(2);
});
