// SVG chart rendering. Charts are built as markup strings from payload
// data; every displayed number is a payload field carried over verbatim,
// and geometry scaling is the only arithmetic performed here. Each datum
// element carries data-label / data-value attributes holding exactly what
// is shown, so tests and click handlers read the same numbers the user sees.

import type {
  CourseRanking,
  DisciplineRanking,
  Distribution,
  DistributionEntry,
  FailureHistogram,
  TdaHistogram,
} from './api.js';
import type { ChartMode, CrDisplay } from './state.js';

const PALETTE: readonly string[] = [
  '#2563eb', '#059669', '#d97706', '#dc2626',
  '#7c3aed', '#0d9488', '#f59e0b', '#6366f1',
];

const NOT_INFORMED_FILL = '#9ca3af';
const OTHERS_FILL = '#6b7280';
const OTHERS_LABEL = 'Others';

export const INSTITUTION_LINE_COLOR = '#dc2626';
export const COURSE_LINE_COLOR = '#059669';

export function esc(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

interface SliceStyle {
  fill: string;
  extra: string;
}

function sliceStyle(index: number, label: string, notInformedLabel: string): SliceStyle {
  if (label === notInformedLabel) {
    return { fill: NOT_INFORMED_FILL, extra: ' stroke="#4b5563" stroke-dasharray="4 2"' };
  }
  if (label === OTHERS_LABEL) {
    return { fill: OTHERS_FILL, extra: '' };
  }
  return { fill: PALETTE[index % PALETTE.length] ?? '#2563eb', extra: '' };
}

function datumAttrs(label: string, value: number): string {
  return `data-role="datum" data-label="${esc(label)}" data-value="${value}"`;
}

export interface DistributionChartOptions {
  notInformedLabel: string;
  /** Which payload number leads in a datum's text; the other follows in parentheses. */
  foreground?: CrDisplay;
}

export function datumText(entry: DistributionEntry, foreground: CrDisplay = 'count'): string {
  if (foreground === 'percent') {
    return `${entry.percent}% (${entry.count})`;
  }
  return `${entry.count} (${entry.percent}%)`;
}

/** Label-to-count mapping a rendering of the distribution must show, in payload order. */
export function distributionValues(distribution: Distribution): Map<string, number> {
  const values = new Map<string, number>();
  for (const entry of distribution.entries) {
    values.set(entry.label, entry.count);
  }
  return values;
}

export function renderDistributionChart(
  distribution: Distribution,
  mode: ChartMode,
  options: DistributionChartOptions,
): string {
  if (mode === 'pie') {
    return renderDistributionPie(distribution, options);
  }
  return renderDistributionBars(distribution, options);
}

function legendRow(
  entry: DistributionEntry,
  index: number,
  y: number,
  options: DistributionChartOptions,
): string {
  const style = sliceStyle(index, entry.label, options.notInformedLabel);
  return (
    `<g ${datumAttrs(entry.label, entry.count)} data-percent="${entry.percent}">` +
    `<rect x="336" y="${y - 9}" width="12" height="12" rx="2" fill="${style.fill}"${style.extra}/>` +
    `<text x="354" y="${y}" font-size="12">` +
    `${esc(entry.label)}: ${esc(datumText(entry, options.foreground))}</text>` +
    `</g>`
  );
}

function renderDistributionPie(
  distribution: Distribution,
  options: DistributionChartOptions,
): string {
  const cx = 160;
  const cy = 160;
  const r = 130;
  const counted = distribution.entries.reduce((sum, entry) => sum + entry.count, 0);

  let slices = '';
  let startAngle = -Math.PI / 2;
  distribution.entries.forEach((entry, index) => {
    if (entry.count === 0 || counted === 0) {
      return;
    }
    const style = sliceStyle(index, entry.label, options.notInformedLabel);
    const angle = (entry.count / counted) * 2 * Math.PI;
    if (angle >= 2 * Math.PI - 1e-9) {
      slices += `<circle cx="${cx}" cy="${cy}" r="${r}" fill="${style.fill}"${style.extra}/>`;
    } else {
      const endAngle = startAngle + angle;
      const x1 = cx + r * Math.cos(startAngle);
      const y1 = cy + r * Math.sin(startAngle);
      const x2 = cx + r * Math.cos(endAngle);
      const y2 = cy + r * Math.sin(endAngle);
      const largeArc = angle > Math.PI ? 1 : 0;
      slices +=
        `<path d="M${cx},${cy} L${x1},${y1} A${r},${r} 0 ${largeArc},1 ${x2},${y2} Z"` +
        ` fill="${style.fill}"${style.extra}/>`;
    }
    startAngle += angle;
  });

  const legend = distribution.entries
    .map((entry, index) => legendRow(entry, index, 40 + index * 24, options))
    .join('');
  const height = Math.max(320, 40 + distribution.entries.length * 24);
  return (
    `<svg viewBox="0 0 600 ${height}" role="img" class="chart chart-pie">` +
    slices +
    legend +
    `</svg>`
  );
}

function renderDistributionBars(
  distribution: Distribution,
  options: DistributionChartOptions,
): string {
  const barLeft = 180;
  const barSpan = 280;
  const rowHeight = 30;
  const max = Math.max(1, ...distribution.entries.map((entry) => entry.count));

  const rows = distribution.entries
    .map((entry, index) => {
      const style = sliceStyle(index, entry.label, options.notInformedLabel);
      const y = 20 + index * rowHeight;
      const width = (entry.count / max) * barSpan;
      return (
        `<g ${datumAttrs(entry.label, entry.count)} data-percent="${entry.percent}">` +
        `<text x="${barLeft - 8}" y="${y + 14}" text-anchor="end" font-size="12">` +
        `${esc(entry.label)}</text>` +
        `<rect x="${barLeft}" y="${y}" width="${width}" height="20" rx="2"` +
        ` fill="${style.fill}"${style.extra}/>` +
        `<text x="${barLeft + width + 6}" y="${y + 14}" font-size="12">` +
        `${esc(datumText(entry, options.foreground))}</text>` +
        `</g>`
      );
    })
    .join('');
  const height = 30 + distribution.entries.length * rowHeight;
  return `<svg viewBox="0 0 600 ${height}" role="img" class="chart chart-bars">${rows}</svg>`;
}

export function renderCourseRankingChart(ranking: CourseRanking): string {
  const barLeft = 120;
  const barSpan = 380;
  const rowHeight = 30;
  const max = Math.max(1, ...ranking.entries.map((entry) => entry.count));

  const rows = ranking.entries
    .map((entry, index) => {
      const y = 20 + index * rowHeight;
      const width = (entry.count / max) * barSpan;
      const fill = PALETTE[index % PALETTE.length] ?? '#2563eb';
      return (
        `<g ${datumAttrs(entry.course_id, entry.count)}>` +
        `<text x="${barLeft - 8}" y="${y + 14}" text-anchor="end" font-size="12">` +
        `${esc(entry.course_id)}</text>` +
        `<rect x="${barLeft}" y="${y}" width="${width}" height="20" rx="2" fill="${fill}"/>` +
        `<text x="${barLeft + width + 6}" y="${y + 14}" font-size="12">${entry.count}</text>` +
        `</g>`
      );
    })
    .join('');
  const height = 30 + ranking.entries.length * rowHeight;
  return `<svg viewBox="0 0 600 ${height}" role="img" class="chart chart-ranking">${rows}</svg>`;
}

const TDA_SERIES = [
  { key: 'institution', label: 'institution', fill: '#2563eb' },
  { key: 'national', label: 'national', fill: '#d97706' },
] as const;

const TDA_REFERENCES = [
  { key: 'institution_avg', label: 'institution avg', stroke: '#2563eb' },
  { key: 'national_avg', label: 'national avg', stroke: '#d97706' },
  { key: 'state_avg', label: 'state avg', stroke: '#7c3aed' },
] as const;

export function renderTdaChart(histogram: TdaHistogram): string {
  const plotLeft = 40;
  const plotTop = 20;
  const plotWidth = 460;
  const plotBottom = 330;
  const plotHeight = plotBottom - plotTop;

  const values: number[] = [];
  for (const entry of histogram.entries) {
    if (entry.institution_tda !== null) values.push(entry.institution_tda);
    if (entry.national_tda !== null) values.push(entry.national_tda);
  }
  for (const reference of TDA_REFERENCES) {
    const value = histogram.references[reference.key];
    if (value !== null) values.push(value);
  }
  const max = Math.max(1, ...values);
  const scaleY = (value: number): number => plotBottom - (value / max) * plotHeight;

  const groupWidth = plotWidth / Math.max(1, histogram.entries.length);
  const barWidth = Math.min(40, groupWidth / 2 - 8);

  let bars = '';
  histogram.entries.forEach((entry, index) => {
    const groupLeft = plotLeft + index * groupWidth;
    const pair: Array<{ series: (typeof TDA_SERIES)[number]; value: number | null }> = [
      { series: TDA_SERIES[0], value: entry.institution_tda },
      { series: TDA_SERIES[1], value: entry.national_tda },
    ];
    pair.forEach(({ series, value }, position) => {
      const x = groupLeft + groupWidth / 2 + (position - 1) * barWidth;
      const label = `${entry.course_name}:${series.key}`;
      if (value === null) {
        bars +=
          `<text x="${x + barWidth / 2}" y="${plotBottom - 4}" text-anchor="middle"` +
          ` font-size="10" data-role="missing" data-label="${esc(label)}">n/a</text>`;
        return;
      }
      const top = scaleY(value);
      bars +=
        `<g ${datumAttrs(label, value)}>` +
        `<rect x="${x}" y="${top}" width="${barWidth - 2}" height="${plotBottom - top}"` +
        ` fill="${series.fill}"/>` +
        `<text x="${x + barWidth / 2}" y="${top - 4}" text-anchor="middle" font-size="10">` +
        `${value}</text>` +
        `</g>`;
    });
    bars +=
      `<text x="${groupLeft + groupWidth / 2}" y="${plotBottom + 16}" text-anchor="middle"` +
      ` font-size="11">${esc(entry.course_name)}</text>`;
  });

  let lines = '';
  TDA_REFERENCES.forEach((reference, index) => {
    const value = histogram.references[reference.key];
    if (value === null) {
      return;
    }
    const y = scaleY(value);
    lines +=
      `<g data-role="reference" data-label="${reference.key}" data-value="${value}">` +
      `<line x1="${plotLeft}" y1="${y}" x2="${plotLeft + plotWidth}" y2="${y}"` +
      ` stroke="${reference.stroke}" stroke-width="1.5" stroke-dasharray="6 3"/>` +
      `<text x="${plotLeft + plotWidth + 6}" y="${y + 4 + index}" font-size="11"` +
      ` fill="${reference.stroke}">${esc(reference.label)} ${value}</text>` +
      `</g>`;
  });

  const legend = TDA_SERIES
    .map(
      (series, index) =>
        `<rect x="${plotLeft + index * 120}" y="352" width="12" height="12" rx="2"` +
        ` fill="${series.fill}"/>` +
        `<text x="${plotLeft + index * 120 + 16}" y="362" font-size="11">` +
        `${series.label}</text>`,
    )
    .join('');

  return (
    `<svg viewBox="0 0 640 380" role="img" class="chart chart-tda">` +
    `<line x1="${plotLeft}" y1="${plotBottom}" x2="${plotLeft + plotWidth}"` +
    ` y2="${plotBottom}" stroke="#d1d5db"/>` +
    bars +
    lines +
    legend +
    `</svg>`
  );
}

export function renderFailureHistogramChart(histogram: FailureHistogram): string {
  const plotLeft = 30;
  const plotTop = 20;
  const plotWidth = 540;
  const plotBottom = 300;
  const plotHeight = plotBottom - plotTop;
  const max = Math.max(1, ...histogram.bins.map((bin) => bin.students));
  const groupWidth = plotWidth / Math.max(1, histogram.bins.length);
  const barWidth = Math.max(4, groupWidth - 8);

  const bars = histogram.bins
    .map((bin, index) => {
      const x = plotLeft + index * groupWidth + (groupWidth - barWidth) / 2;
      const height = (bin.students / max) * plotHeight;
      const top = plotBottom - height;
      return (
        `<g ${datumAttrs(String(bin.failures), bin.students)}>` +
        `<rect x="${x}" y="${top}" width="${barWidth}" height="${height}" fill="#2563eb"/>` +
        `<text x="${x + barWidth / 2}" y="${top - 4}" text-anchor="middle" font-size="10">` +
        `${bin.students}</text>` +
        `<text x="${x + barWidth / 2}" y="${plotBottom + 14}" text-anchor="middle"` +
        ` font-size="10">${bin.failures}</text>` +
        `</g>`
      );
    })
    .join('');

  return (
    `<svg viewBox="0 0 600 330" role="img" class="chart chart-failures">` +
    `<line x1="${plotLeft}" y1="${plotBottom}" x2="${plotLeft + plotWidth}"` +
    ` y2="${plotBottom}" stroke="#d1d5db"/>` +
    bars +
    `</svg>`
  );
}

export function renderDisciplineChart(ranking: DisciplineRanking): string {
  const barLeft = 130;
  const barSpan = 380;
  const rowHeight = 30;
  const top = 30;

  const rates = ranking.entries.map((entry) => entry.failure_rate);
  const { institution_avg_rate, course_avg_rate } = ranking.references;
  if (institution_avg_rate !== null) rates.push(institution_avg_rate);
  if (course_avg_rate !== null) rates.push(course_avg_rate);
  const max = Math.max(1, ...rates);
  const scaleX = (value: number): number => barLeft + (value / max) * barSpan;

  const rows = ranking.entries
    .map((entry, index) => {
      const y = top + index * rowHeight;
      const label = `${entry.course_id}/${entry.discipline_id}`;
      const width = scaleX(entry.failure_rate) - barLeft;
      return (
        `<g ${datumAttrs(label, entry.failure_rate)}` +
        ` data-enrolled="${entry.enrolled_count}" data-failures="${entry.failure_count}">` +
        `<text x="${barLeft - 8}" y="${y + 14}" text-anchor="end" font-size="12">` +
        `${esc(label)}</text>` +
        `<rect x="${barLeft}" y="${y}" width="${width}" height="20" rx="2" fill="#2563eb"/>` +
        `<text x="${barLeft + width + 6}" y="${y + 14}" font-size="12">` +
        `${entry.failure_rate}% (${entry.failure_count}/${entry.enrolled_count})</text>` +
        `</g>`
      );
    })
    .join('');

  const chartBottom = top + ranking.entries.length * rowHeight + 6;
  let lines = '';
  const references = [
    { key: 'institution_avg_rate', label: 'institution avg', stroke: INSTITUTION_LINE_COLOR, value: institution_avg_rate },
    { key: 'course_avg_rate', label: 'course avg', stroke: COURSE_LINE_COLOR, value: course_avg_rate },
  ];
  references.forEach((reference, index) => {
    if (reference.value === null) {
      return;
    }
    const x = scaleX(reference.value);
    lines +=
      `<g data-role="reference" data-label="${reference.key}" data-value="${reference.value}">` +
      `<line x1="${x}" y1="${top - 10}" x2="${x}" y2="${chartBottom}"` +
      ` stroke="${reference.stroke}" stroke-width="1.5" stroke-dasharray="6 3"/>` +
      `<text x="${x + 4}" y="${top - 14 + index * 12}" font-size="11" fill="${reference.stroke}">` +
      `${esc(reference.label)} ${reference.value}</text>` +
      `</g>`;
  });

  const height = chartBottom + 20;
  return (
    `<svg viewBox="0 0 600 ${height}" role="img" class="chart chart-disciplines">` +
    rows +
    lines +
    `</svg>`
  );
}
