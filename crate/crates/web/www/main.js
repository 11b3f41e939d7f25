import init, { aperture_curve, photon_curve, simulate_scatter } from "./pkg/twinbeam_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);

function axes(ctx, xs, ys, pad) {
  const [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  const [y0, y1] = [Math.min(0, ...ys), Math.max(...ys) * 1.05 || 1];
  const { width: w, height: h } = ctx.canvas;
  const sx = (x) => pad + ((x - x0) / (x1 - x0 || 1)) * (w - 2 * pad);
  const sy = (y) => h - pad - ((y - y0) / (y1 - y0 || 1)) * (h - 2 * pad);
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#888";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#444";
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 14);
  ctx.fillText(x1.toPrecision(3), w - pad - 30, h - pad + 14);
  ctx.fillText(y1.toPrecision(3), 4, pad + 4);
  ctx.fillText(y0.toPrecision(3), 4, h - pad);
  return { sx, sy, x0, x1 };
}

function line(ctx, xs, ys, { sx, sy }, color) {
  ctx.strokeStyle = color;
  ctx.beginPath();
  xs.forEach((x, i) => (i ? ctx.lineTo(sx(x), sy(ys[i])) : ctx.moveTo(sx(x), sy(ys[i]))));
  ctx.stroke();
}

function guard(out, fn) {
  try {
    out.classList.remove("error");
    fn();
  } catch (e) {
    out.classList.add("error");
    out.textContent = String(e.message ?? e);
  }
}

function drawAperture() {
  guard($("ap-out"), () => {
    const r = JSON.parse(aperture_curve(num("ap-idler"), num("ap-shift"), num("ap-n"), num("ap-eta1"), num("ap-eta2")));
    const xs = r.points.map((p) => p.signal_mm);
    const ys = r.points.map((p) => p.nrf);
    const ctx = $("ap-plot").getContext("2d");
    const s = axes(ctx, xs, [...ys, 1], 40);
    line(ctx, [s.x0, s.x1], [1, 1], s, "#c66");
    line(ctx, xs, ys, s, "#036");
    ctx.strokeStyle = "#393";
    ctx.beginPath();
    ctx.moveTo(s.sx(r.matched_mm), 40);
    ctx.lineTo(s.sx(r.matched_mm), ctx.canvas.height - 40);
    ctx.stroke();
    const best = r.points.reduce((a, b) => (b.nrf < a.nrf ? b : a));
    $("ap-out").textContent =
      `matched signal Ø ${r.matched_mm.toFixed(3)} mm; minimum NRF ${best.nrf.toFixed(3)} at ${best.signal_mm.toFixed(3)} mm (m=${best.m}, k_s=${best.k_s}, k_i=${best.k_i})`;
  });
}

function drawPhotons() {
  guard($("ph-out"), () => {
    const r = JSON.parse(photon_curve(num("ph-shift"), num("ph-eta1"), num("ph-eta2"), num("ph-max")));
    const xs = r.points.map((p) => p.mean_photons);
    const ctx = $("ph-plot").getContext("2d");
    const s = axes(ctx, xs, r.points.map((p) => p.nrf), 40);
    line(ctx, xs, r.points.map((p) => p.nrf), s, "#036");
    line(ctx, xs, r.points.map((p) => p.mismatch), s, "#c80");
    line(ctx, xs, r.points.map((p) => p.imbalance), s, "#909");
    line(ctx, xs, r.points.map((p) => p.loss), s, "#393");
    $("ph-out").textContent =
      `m=${r.m} k_s=${r.k_s} k_i=${r.k_i}; k/(m+k) = ${r.mismatch_slope.toFixed(5)}  (blue total, orange mismatch, purple imbalance, green loss)`;
  });
}

function runScatter() {
  guard($("mc-out"), () => {
    const r = JSON.parse(
      simulate_scatter(num("mc-m"), num("mc-k"), num("mc-n"), num("mc-eta1"), num("mc-eta2"), num("mc-pulses"), num("mc-seed")),
    );
    const all = r.points.flat();
    const ctx = $("mc-plot").getContext("2d");
    const s = axes(ctx, all, all, 40);
    ctx.fillStyle = "rgba(0, 51, 102, 0.35)";
    for (const [a, b] of r.points) ctx.fillRect(s.sx(a) - 1, s.sy(b) - 1, 2, 2);
    const ci = r.ci_lo === null ? "" : ` [${r.ci_lo.toFixed(4)}, ${r.ci_hi.toFixed(4)}]`;
    $("mc-out").textContent =
      `NRF ${r.nrf.toFixed(4)}${ci}; predicted ${r.predicted.toFixed(4)}; ⟨n1⟩=${r.mean_n1.toFixed(1)} ⟨n2⟩=${r.mean_n2.toFixed(1)}`;
  });
}

await init();
for (const id of ["ap-idler", "ap-shift", "ap-n", "ap-eta1", "ap-eta2"]) $(id).addEventListener("input", drawAperture);
for (const id of ["ph-shift", "ph-eta1", "ph-eta2", "ph-max"]) $(id).addEventListener("input", drawPhotons);
$("mc-run").addEventListener("click", runScatter);
drawAperture();
drawPhotons();
runScatter();
