import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { afterEach, beforeEach, describe, expect, test } from "vitest";

import { main } from "../src/cli.js";

const HEADER = "detector,snr_db,iteration,trials_bits,bit_errors,ber,ci_halfwidth,seed";

let dir: string;

beforeEach(() => {
  dir = fs.mkdtempSync(path.join(os.tmpdir(), "ber-plot-"));
});

afterEach(() => {
  fs.rmSync(dir, { recursive: true, force: true });
});

function write(name: string, text: string): string {
  const p = path.join(dir, name);
  fs.writeFileSync(p, text);
  return p;
}

describe("cli", () => {
  test("renders an SVG from a valid CSV", () => {
    const csv = write("in.csv",
      `${HEADER}\nrmf,2,0,1000,50,0.05,0.013,7\nrmf,6,0,1000,10,0.01,0.006,7\n`);
    const out = path.join(dir, "out.svg");
    const code = main(["--csv", csv, "--out", out]);
    expect(code).toBe(0);
    const svg = fs.readFileSync(out, "utf-8");
    expect(svg.startsWith("<svg")).toBe(true);
    expect(svg).toContain('data-ber="0.05"');
  });

  test("empty CSV errors and writes no file", () => {
    const csv = write("empty.csv", `${HEADER}\n`);
    const out = path.join(dir, "out.svg");
    expect(main(["--csv", csv, "--out", out])).toBe(1);
    expect(fs.existsSync(out)).toBe(false);
  });

  test("missing column errors and writes no file", () => {
    const csv = write("bad.csv", "detector,snr_db\nrmf,1\n");
    const out = path.join(dir, "out.svg");
    expect(main(["--csv", csv, "--out", out])).toBe(1);
    expect(fs.existsSync(out)).toBe(false);
  });

  test("missing input file errors", () => {
    expect(main(["--csv", path.join(dir, "nope.csv"),
                 "--out", path.join(dir, "o.svg")])).toBe(1);
  });

  test("iteration selector flows through", () => {
    const csv = write("coded.csv",
      `${HEADER}\nmmse,4,1,1000,80,0.08,0.017,7\nmmse,4,5,1000,20,0.02,0.009,7\n`);
    const out = path.join(dir, "out.svg");
    expect(main(["--csv", csv, "--out", out, "--coded", "--iteration", "5"])).toBe(0);
    const svg = fs.readFileSync(out, "utf-8");
    expect(svg).toContain('data-ber="0.02"');
    expect(svg).not.toContain('data-ber="0.08"');
  });
});
