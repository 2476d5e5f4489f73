// Static page driver. Expects the wasm-pack output in ./pkg (see the README:
//   wasm-pack build crates/demo --target web --out-dir www/pkg
// then serve crates/demo/www with any static file server).

import init, { train_compare, posterior_curve, advantage_pipeline } from "./pkg/realpg_demo.js";

const COLORS = ["#2455c3", "#c3342b", "#2b8a3e", "#8a5d2b"];

function plot(canvas, series, opts = {}) {
  const ctx = canvas.getContext("2d");
  const W = canvas.width, H = canvas.height;
  const pad = { l: 52, r: 14, t: 26, b: 34 };
  ctx.clearRect(0, 0, W, H);

  const xs = series.flatMap(s => s.x);
  const ys = series.flatMap(s => s.y);
  if (xs.length === 0) return;
  const xMin = Math.min(...xs), xMax = Math.max(...xs);
  let yMin = Math.min(...ys), yMax = Math.max(...ys);
  if (opts.yMin !== undefined) yMin = Math.min(yMin, opts.yMin);
  if (opts.yMax !== undefined) yMax = Math.max(yMax, opts.yMax);
  const ySpan = (yMax - yMin) || 1;
  const x2px = x => pad.l + (x - xMin) / ((xMax - xMin) || 1) * (W - pad.l - pad.r);
  const y2px = y => H - pad.b - (y - yMin) / ySpan * (H - pad.t - pad.b);

  ctx.strokeStyle = "#e3e8f0";
  ctx.fillStyle = "#5a6578";
  ctx.font = "12px system-ui";
  ctx.lineWidth = 1;
  for (let i = 0; i <= 4; i++) {
    const y = yMin + ySpan * i / 4;
    ctx.beginPath();
    ctx.moveTo(pad.l, y2px(y));
    ctx.lineTo(W - pad.r, y2px(y));
    ctx.stroke();
    ctx.fillText(y.toFixed(2), 6, y2px(y) + 4);
  }
  for (let i = 0; i <= 5; i++) {
    const x = xMin + (xMax - xMin) * i / 5;
    ctx.fillText(x.toFixed(0), x2px(x) - 8, H - 12);
  }
  if (opts.title) {
    ctx.fillStyle = "#1c2330";
    ctx.fillText(opts.title, pad.l, 16);
  }

  series.forEach((s, i) => {
    ctx.strokeStyle = COLORS[i % COLORS.length];
    ctx.lineWidth = 2;
    ctx.beginPath();
    s.x.forEach((x, j) => {
      const px = x2px(x), py = y2px(s.y[j]);
      j === 0 ? ctx.moveTo(px, py) : ctx.lineTo(px, py);
    });
    ctx.stroke();
    ctx.fillStyle = COLORS[i % COLORS.length];
    ctx.fillText(s.label, W - pad.r - 170, pad.t + 16 * i);
  });
}

function parseResult(text, statusEl) {
  const data = JSON.parse(text);
  if (data.error) {
    statusEl.textContent = data.error;
    statusEl.classList.add("error");
    return null;
  }
  statusEl.classList.remove("error");
  return data;
}

function bindTraining() {
  const button = document.getElementById("run-train");
  const status = document.getElementById("train-status");
  button.addEventListener("click", () => {
    button.disabled = true;
    status.textContent = "training…";
    // Let the browser paint before the synchronous wasm call.
    setTimeout(() => {
      const config = {
        steps: Number(document.getElementById("steps").value),
        group_size: Number(document.getElementById("group").value),
        lambda: Number(document.getElementById("lambda").value),
        beta: Number(document.getElementById("beta").value),
        temperature: Number(document.getElementById("temp").value),
        sigma_x: Number(document.getElementById("sigma").value),
        seed: Number(document.getElementById("seed").value),
      };
      const t0 = performance.now();
      const data = parseResult(train_compare(JSON.stringify(config)), status);
      if (data) {
        const ms = (performance.now() - t0).toFixed(0);
        const rmse = data.curves.map(c => `${c.label} rmse ${c.final_rmse.toFixed(3)}`).join(", ");
        status.textContent = `done in ${ms} ms — ${rmse}`;
        plot(document.getElementById("pearson-plot"),
          data.curves.map(c => ({ label: c.label, x: c.steps, y: c.pearson })),
          { title: "test Pearson r vs training step", yMin: 0 });
        plot(document.getElementById("entropy-plot"),
          data.curves.map(c => ({ label: c.label, x: c.steps, y: c.entropy })),
          { title: "mean per-token entropy (nats) vs training step", yMin: 0 });
      }
      button.disabled = false;
    }, 30);
  });
}

function bindPosterior() {
  const button = document.getElementById("run-posterior");
  const status = document.getElementById("posterior-status");
  const draw = () => {
    const alpha = Number(document.getElementById("p-alpha").value);
    const sigma = Number(document.getElementById("p-sigma").value);
    const flip = Number(document.getElementById("p-flip").value);
    const data = parseResult(posterior_curve(alpha, sigma, flip, 40), status);
    if (!data) return;
    status.textContent = "";
    const centers = {
      label: "kernel mean at centers",
      x: [1, 2, 3, 4, 5],
      y: data.kernel_mean,
    };
    plot(document.getElementById("posterior-plot"),
      [{ label: "posterior mean", x: data.position, y: data.posterior }, centers],
      { title: "E[score | features] along the center path", yMin: 1, yMax: 5 });
  };
  button.addEventListener("click", draw);
  draw();
}

function bindAdvantages() {
  const button = document.getElementById("run-adv");
  const status = document.getElementById("adv-status");
  const table = document.getElementById("adv-table");
  const compute = () => {
    const raw = document.getElementById("rewards").value
      .split(",").map(s => Number(s.trim())).filter(v => !Number.isNaN(v));
    const data = parseResult(advantage_pipeline(JSON.stringify(raw)), status);
    if (!data) { table.innerHTML = ""; return; }
    status.textContent = `σ(A) = ${data.sigma.toFixed(5)}`;
    const rows = ["reward r", "baseline b", "advantage A", "clipped standardized"];
    const cols = [data.rewards, data.baselines, data.advantages, data.standardized];
    table.innerHTML =
      `<tr><th></th>${data.rewards.map((_, i) => `<th>sample ${i + 1}</th>`).join("")}</tr>` +
      rows.map((name, r) =>
        `<tr><th>${name}</th>${cols[r].map(v => `<td>${v.toFixed(5)}</td>`).join("")}</tr>`
      ).join("");
  };
  button.addEventListener("click", compute);
  compute();
}

init().then(() => {
  bindTraining();
  bindPosterior();
  bindAdvantages();
});
