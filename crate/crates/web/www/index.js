import init, { antialias_curve, project, perf_sweep } from "./pkg/ipsim_web.js";

const $ = (id) => document.getElementById(id);

function showError(el, e) {
  el.textContent = String(e.message ?? e);
  el.className = "err";
}

// Plots one or more series against a shared x axis. Log x when asked.
function plot(canvas, xs, series, { logX = false, yMax } = {}) {
  const g = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  g.clearRect(0, 0, w, h);
  const fx = logX ? Math.log : (v) => v;
  const x0 = fx(xs[0]), x1 = fx(xs[xs.length - 1]);
  const top = yMax ?? Math.max(...series.flatMap((s) => s.ys));
  const px = (x) => 30 + ((fx(x) - x0) / (x1 - x0 || 1)) * (w - 40);
  const py = (y) => h - 20 - (y / (top || 1)) * (h - 30);
  g.strokeStyle = "#888";
  g.strokeRect(30, 10, w - 40, h - 30);
  for (const s of series) {
    g.strokeStyle = s.color;
    g.beginPath();
    xs.forEach((x, i) => (i ? g.lineTo(px(x), py(s.ys[i])) : g.moveTo(px(x), py(s.ys[i]))));
    g.stroke();
  }
  return { px, py };
}

function drawAntialias() {
  const cutoff = Number($("aa-cutoff").value);
  const c = JSON.parse(antialias_curve(cutoff, 200));
  $("aa-val").textContent = `${cutoff.toFixed(2)}, sigma ${c.sigma.toFixed(3)} px`;
  const { px, py } = plot($("aa-plot"), c.freqs, [{ ys: c.response, color: "#06c" }], { yMax: 1 });
  const g = $("aa-plot").getContext("2d");
  g.strokeStyle = "#c60";
  g.beginPath();
  g.moveTo(px(c.design_freq), py(0));
  g.lineTo(px(c.design_freq), py(1));
  g.moveTo(px(0), py(Math.SQRT1_2));
  g.lineTo(px(0.5), py(Math.SQRT1_2));
  g.stroke();
}

function drawMap(canvas, values, cols, rows, lo, hi) {
  const g = canvas.getContext("2d");
  const img = g.createImageData(cols, rows);
  values.forEach((v, i) => {
    const t = Math.round((255 * (v - lo)) / (hi - lo || 1));
    img.data.set([t, t, t, 255], 4 * i);
  });
  const tmp = new OffscreenCanvas(cols, rows);
  tmp.getContext("2d").putImageData(img, 0, 0);
  g.imageSmoothingEnabled = false;
  g.drawImage(tmp, 0, 0, canvas.width, canvas.height);
}

function runProjection() {
  try {
    const r = JSON.parse(project(
      $("pj-pattern").value,
      Number($("pj-size").value),
      Number($("pj-patch").value),
      Number($("pj-m").value),
      Number($("pj-seed").value),
    ));
    const all = r.analog.concat(r.exact);
    const lo = Math.min(...all), hi = Math.max(...all);
    drawMap($("pj-analog"), r.analog, r.cols, r.rows, lo, hi);
    drawMap($("pj-exact"), r.exact, r.cols, r.rows, lo, hi);
    $("pj-stats").className = "";
    $("pj-stats").textContent =
      `feature 0 over ${r.cols}x${r.rows} patches (left analog, right exact)\n` +
      `max abs err ${r.max_abs_err.toExponential(3)}  rms ${r.rms_err.toExponential(3)}  ENOB ${r.enob.toFixed(2)}`;
  } catch (e) {
    showError($("pj-stats"), e);
  }
}

function runSweep() {
  try {
    const rows = JSON.parse(perf_sweep(
      Number($("pf-c").value),
      Number($("pf-patch").value),
      Number($("pf-frac").value),
      8, 2048, 40,
    ));
    const ms = rows.map((r) => r.m);
    const fps = rows.map((r) => r.frame_rate_hz);
    const mw = rows.map((r) => r.power_mw);
    const top = Math.max(...fps, ...mw);
    plot($("pf-plot"), ms, [{ ys: fps, color: "#06c" }, { ys: mw, color: "#c60" }], { logX: true, yMax: top });
    $("pf-table").className = "";
    $("pf-table").textContent = "blue: frame rate (Hz), orange: power (mW)\n\n" +
      "     M   frame Hz   Mpix/s   power mW   vs Bayer\n" +
      rows.filter((_, i) => i % 5 === 0).map((r) =>
        `${String(r.m).padStart(6)} ${r.frame_rate_hz.toFixed(1).padStart(10)} ${r.mpix_per_s.toFixed(1).padStart(8)} ` +
        `${r.power_mw.toFixed(2).padStart(10)} ${r.reduction_bayer.toFixed(2).padStart(10)}`).join("\n");
  } catch (e) {
    showError($("pf-table"), e);
  }
}

await init();
$("aa-cutoff").addEventListener("input", drawAntialias);
$("pj-run").addEventListener("click", runProjection);
for (const id of ["pf-c", "pf-patch", "pf-frac"]) $(id).addEventListener("change", runSweep);
drawAntialias();
runProjection();
runSweep();
