from __future__ import annotations

import html
from pathlib import Path
from typing import Any, Dict, List


BOOTSTRAP_CSS = "https://cdn.jsdelivr.net/npm/bootstrap@5.3.2/dist/css/bootstrap.min.css"


def _format_float(value: Any, digits: int = 4) -> str:
    try:
        v = float(value)
    except (TypeError, ValueError):
        return ""
    if v != v:
        return "nan"
    if v != 0 and (abs(v) < 1e-3 or abs(v) >= 1e5):
        return f"{v:.{digits - 1}e}"
    return f"{v:.{digits}f}"


def _criterion_row(c: Dict[str, Any]) -> str:
    passed = bool(c.get("pass"))
    badge = "bg-success" if passed else "bg-danger"
    label = "통과" if passed else "실패"
    z = c.get("z")
    z_html = _format_float(z, 2) if z is not None else "--"
    return (
        "<tr>"
        f"<td>{html.escape(str(c.get('name', '')))}</td>"
        f"<td class='text-end font-monospace'>{_format_float(c.get('estimate'))}</td>"
        f"<td class='text-end font-monospace'>{_format_float(c.get('predicted'))}</td>"
        f"<td class='text-end font-monospace'>{z_html}</td>"
        f"<td class='text-center'><span class='badge {badge} rounded-pill'>{label}</span></td>"
        "</tr>"
    )


def _stat_card(label: str, value: Any) -> str:
    return (
        "<div class='col-6 col-md-3'><div class='stat-card h-100'>"
        f"<div class='label'>{html.escape(label)}</div>"
        f"<div class='value'>{html.escape(str(value))}</div>"
        "</div></div>"
    )


def render_report(out_root: Path, summary: Dict[str, Any], tables: List[str] | None = None) -> Path:
    """Single-page HTML view of a run summary: headline counts, the criteria table and links to the CSVs."""
    criteria = summary.get("criteria", [])
    manifest = summary.get("manifest", {})
    experiment = summary.get("experiment", "")
    n_pass = sum(1 for c in criteria if c.get("pass"))
    n_fail = len(criteria) - n_pass

    rows_html = "".join(_criterion_row(c) for c in criteria) or (
        "<tr><td colspan='5' class='text-muted'>판정 기준이 없습니다.</td></tr>"
    )
    cards = "".join(
        [
            _stat_card("판정 기준", len(criteria)),
            _stat_card("통과", n_pass),
            _stat_card("실패", n_fail),
            _stat_card("제외된 replica", manifest.get("excluded", 0)),
        ]
    )
    links = "".join(
        f"<li class='list-group-item'><a href='{html.escape(name)}'>{html.escape(name)}</a></li>" for name in (tables or [])
    )
    tables_html = (
        f"<div class='card shadow-sm border-0 mb-4'><div class='card-header bg-white'>결과 표</div>"
        f"<ul class='list-group list-group-flush'>{links}</ul></div>"
        if links
        else ""
    )
    manifest_html = " · ".join(
        f"{html.escape(str(k))} {html.escape(str(v))}" for k, v in manifest.items() if k != "experiment"
    )
    verdict = "bg-success" if n_fail == 0 else "bg-danger"

    html_doc = f"""
    <!doctype html>
    <html>
      <head>
        <meta charset="utf-8" />
        <meta name="viewport" content="width=device-width, initial-scale=1" />
        <title>{html.escape(experiment)} report</title>
        <link href="{BOOTSTRAP_CSS}" rel="stylesheet"/>
        <style>
          body {{ background-color: #f8f9fa; }}
          .stat-card {{ background: #ffffff; border-radius: 1rem; padding: 1rem; box-shadow: 0 0.25rem 0.5rem rgba(0,0,0,0.05); }}
          .stat-card .label {{ font-size: 0.75rem; text-transform: uppercase; letter-spacing: 0.05em; color: #6c757d; }}
          .stat-card .value {{ font-size: 1.6rem; font-weight: 600; color: #212529; }}
        </style>
      </head>
      <body>
        <div class="container my-4">
          <h3 class="mb-1">{html.escape(experiment)} <span class="badge {verdict} rounded-pill fs-6 align-middle">{'PASS' if n_fail == 0 else 'FAIL'}</span></h3>
          <div class="small text-muted mb-3">{manifest_html}</div>
          <div class="row g-3 mb-4">{cards}</div>
          <div class="card shadow-sm border-0 mb-4">
            <div class="card-header bg-white">판정 기준</div>
            <div class="table-responsive">
              <table class="table table-sm table-hover mb-0">
                <thead><tr><th>name</th><th class="text-end">estimate</th><th class="text-end">predicted</th><th class="text-end">z</th><th class="text-center">result</th></tr></thead>
                <tbody>{rows_html}</tbody>
              </table>
            </div>
          </div>
          {tables_html}
        </div>
      </body>
    </html>
    """
    out_path = Path(out_root) / "report.html"
    out_path.write_text(html_doc, encoding="utf-8")
    return out_path
