use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::image_test::{Comparison, ImageOutcome};
use super::StatsError;

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryRow {
    pub category: String,
    pub image_count: usize,
    pub rejections: usize,
    pub rejection_rate: f64,
}

impl CategoryRow {
    fn new(category: String, image_count: usize, rejections: usize) -> Self {
        let rejection_rate = if image_count == 0 {
            0.0
        } else {
            rejections as f64 / image_count as f64
        };
        Self {
            category,
            image_count,
            rejections,
            rejection_rate,
        }
    }
}

/// Per-category rejection counts, sorted by category name, plus a total row.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryReport {
    pub comparison: Option<Comparison>,
    pub rows: Vec<CategoryRow>,
    pub total: CategoryRow,
}

impl CategoryReport {
    pub fn row(&self, category: &str) -> Option<&CategoryRow> {
        self.rows.iter().find(|r| r.category == category)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn title(&self) -> String {
        match &self.comparison {
            Some(Comparison::TwentyVsTen) => "Comparing 20s Against 10s".to_owned(),
            Some(Comparison::TwentyVsForty) => "Comparing 20s Against 40s".to_owned(),
            Some(Comparison::Custom(c)) => format!("Comparison {c}"),
            None => "All comparisons".to_owned(),
        }
    }

    /// `category,count,rejections,rate` with a header and a trailing total.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("category,count,rejections,rate\n");
        for r in self.rows.iter().chain(std::iter::once(&self.total)) {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                csv_field(&r.category),
                r.image_count,
                r.rejections,
                r.rejection_rate
            );
        }
        out
    }

    /// Aligned text table.
    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.category.len())
            .chain([8, self.total.category.len()])
            .max()
            .unwrap_or(8);
        let mut out = format!("{}\n", self.title());
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>10}  {:>14}",
            "Category", "Images", "Rejections", "Rejection Rate"
        );
        let rule = "-".repeat(width + 36);
        let _ = writeln!(out, "{rule}");
        let mut line = |r: &CategoryRow| {
            let _ = writeln!(
                out,
                "{:<width$}  {:>6}  {:>10}  {:>14}",
                r.category,
                r.image_count,
                r.rejections,
                short_rate(r.rejection_rate)
            );
        };
        for r in &self.rows {
            line(r);
        }
        line(&self.total);
        out
    }
}

/// Two decimals without trailing zeros: 0.4, 0.29, 0.
pub fn short_rate(rate: f64) -> String {
    let s = format!("{rate:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_owned()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Folds image outcomes into per-category counts. `categories` maps image id
/// to category.
pub fn aggregate_categories(
    results: &[ImageOutcome],
    categories: &BTreeMap<String, String>,
) -> Result<CategoryReport, StatsError> {
    let mut sorted: Vec<&ImageOutcome> = results.iter().collect();
    sorted.sort_by(|a, b| a.image_id.cmp(&b.image_id));

    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in &sorted {
        let category = categories
            .get(&r.image_id)
            .ok_or_else(|| StatsError::UnknownImage(r.image_id.clone()))?;
        let e = counts.entry(category.as_str()).or_default();
        e.0 += 1;
        e.1 += usize::from(r.reject);
    }

    let rows: Vec<CategoryRow> = counts
        .into_iter()
        .map(|(c, (n, k))| CategoryRow::new(c.to_owned(), n, k))
        .collect();
    let total = CategoryRow::new(
        "Total".to_owned(),
        rows.iter().map(|r| r.image_count).sum(),
        rows.iter().map(|r| r.rejections).sum(),
    );
    let comparison = match sorted.first() {
        Some(first) if sorted.iter().all(|r| r.comparison == first.comparison) => {
            Some(first.comparison.clone())
        }
        _ => None,
    };
    Ok(CategoryReport {
        comparison,
        rows,
        total,
    })
}
