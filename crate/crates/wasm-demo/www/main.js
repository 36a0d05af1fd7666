import init, { texts, score_questions, compare_groups, compare_correlations } from "./pkg/kidsask_wasm_demo.js";

const $ = (id) => document.getElementById(id);
const fmt = (x) => (typeof x === "number" ? x.toPrecision(4) : x ?? "");

function run(out, f) {
  try {
    out.classList.remove("err");
    out.innerHTML = f();
  } catch (e) {
    out.classList.add("err");
    out.textContent = String(e);
  }
}

function table(headers, rows) {
  const th = headers.map((h) => `<th>${h}</th>`).join("");
  const tr = rows.map((r) => `<tr>${r.map((c) => `<td>${fmt(c)}</td>`).join("")}</tr>`).join("");
  return `<table><tr>${th}</tr>${tr}</table>`;
}

const esc = (s) => s.replace(/[&<>]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;" })[c]);

await init();

const list = JSON.parse(texts());
for (const t of list) $("text").add(new Option(t.title, t.id));
const showBody = () => ($("text-body").textContent = list.find((t) => t.id === $("text").value)?.body ?? "");
$("text").onchange = showBody;
showBody();

$("score").onclick = () =>
  run($("score-out"), () => {
    const r = JSON.parse(score_questions($("text").value, $("questions").value, $("cue-mode").value));
    const cue = r.cue ? `<p>Cue: <em>${esc(r.cue.join(" / "))}</em></p>` : "";
    return cue + table(
      ["question", "accepted", "reason", "label", "confidence", "needs human", "used cue", "quality"],
      r.questions.map((q) => [
        esc(q.raw),
        q.accepted,
        q.reject_reason,
        q.divergence?.label,
        q.divergence?.source?.confidence,
        q.divergence?.needs_human,
        q.used_cue,
        q.quality ? `${q.quality.total} (${q.quality.high_level}/${q.quality.construction}/${q.quality.qword_use})` : "",
      ]),
    );
  });

$("groups").onclick = () =>
  run($("groups-out"), () => {
    const r = JSON.parse(compare_groups($("g1").value, $("g2").value, $("g3").value));
    const a = r.anova;
    return `<p>F(${a.df_between}, ${a.df_within}) = ${fmt(a.f)}, p = ${fmt(a.p)}</p>` +
      table(["group", "n", "mean", "sd"], r.summaries.map((s, i) => [i + 1, s.n, s.mean, s.sd])) +
      table(["pair", "t", "df", "p"], r.welch.map((w) => [`${w.a + 1} vs ${w.b + 1}`, w.t, w.df, w.p]));
  });

$("corr").onclick = () =>
  run($("corr-out"), () => {
    const r = JSON.parse(compare_correlations(+$("r1").value, +$("n1").value, +$("r2").value, +$("n2").value));
    return `<p>z = ${fmt(r.z)}, two-sided p = ${fmt(r.p_two_sided)}</p>`;
  });
