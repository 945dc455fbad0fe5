import { ChildProcess, spawn } from "node:child_process";
import path from "node:path";
import readline from "node:readline";
import { fileURLToPath } from "node:url";

export const REPO_ROOT = path.resolve(
  path.dirname(fileURLToPath(import.meta.url)),
  "../..",
);

export interface SimHandle {
  proc: ChildProcess;
  port: number;
  seed: number;
  stop: () => Promise<void>;
}

/** Launch the simulator CLI and wait for its listening line. */
export function startSim(args: string[], timeoutMs = 30_000): Promise<SimHandle> {
  const proc = spawn("python3", ["-m", "viloop.cli", ...args], {
    cwd: REPO_ROOT,
    stdio: ["ignore", "pipe", "pipe"],
  });
  let stderr = "";
  proc.stderr?.on("data", (d) => {
    stderr += String(d);
  });

  return new Promise((resolve, reject) => {
    const timer = setTimeout(() => {
      proc.kill();
      reject(new Error(`simulator did not report a port in time\n${stderr}`));
    }, timeoutMs);

    const rl = readline.createInterface({ input: proc.stdout! });
    rl.on("line", (line) => {
      let parsed: { listening?: number; seed?: number };
      try {
        parsed = JSON.parse(line);
      } catch {
        return;
      }
      if (typeof parsed.listening === "number") {
        clearTimeout(timer);
        resolve({
          proc,
          port: parsed.listening,
          seed: parsed.seed ?? 0,
          stop: () =>
            new Promise<void>((done) => {
              proc.once("exit", () => done());
              proc.kill("SIGINT");
              setTimeout(() => proc.kill("SIGKILL"), 5000).unref();
            }),
        });
      }
    });
    proc.on("exit", (code) => {
      clearTimeout(timer);
      reject(new Error(`simulator exited early (code ${code})\n${stderr}`));
    });
  });
}

export function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

export async function waitFor(
  predicate: () => boolean,
  timeoutMs: number,
  label: string,
): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    if (predicate()) {
      return;
    }
    await sleep(10);
  }
  throw new Error(`timed out waiting for ${label}`);
}
