//! Seeded synthetic datasets shaped like the public benchmarks used in the
//! experiments: a three-cultivar wine table, a prognosis table with a leaked
//! response feature, and a student-grade table with a gender column.

use std::path::Path;

use rand::distr::Open01;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::ingest::SchemaHints;
use crate::normal::inv_cdf;
use crate::rng::Stream;
use crate::space::Task;

/// A raw table of strings, exactly as it would appear in a CSV file.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub response: String,
    pub task: Task,
}

impl RawTable {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn hints(&self) -> SchemaHints {
        SchemaHints {
            response: self.response.clone(),
            task: Some(self.task),
            ..SchemaHints::default()
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    inv_cdf(rng.sample::<f64, _>(Open01))
}

fn fmt(v: f64, decimals: usize) -> String {
    let s = format!("{v:.decimals$}");
    // avoid "-0.00"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

const WINE_COLUMNS: [&str; 13] = [
    "alcohol",
    "malic_acid",
    "ash",
    "alcalinity",
    "magnesium",
    "phenols",
    "flavanoids",
    "nonflavanoid_phenols",
    "proanthocyanins",
    "color_intensity",
    "hue",
    "od280",
    "proline",
];

// per-cultivar means and spreads, roughly those of the classic wine data
const WINE_MEANS: [[f64; 13]; 3] = [
    [13.74, 2.01, 2.46, 17.0, 106.3, 2.84, 2.98, 0.29, 1.90, 5.53, 1.06, 3.16, 1116.0],
    [12.28, 1.93, 2.24, 20.2, 94.5, 2.26, 2.08, 0.36, 1.63, 3.09, 1.06, 2.79, 520.0],
    [13.15, 3.33, 2.44, 21.4, 99.3, 1.68, 0.78, 0.45, 1.15, 7.40, 0.68, 1.68, 630.0],
];
const WINE_STDS: [[f64; 13]; 3] = [
    [0.46, 0.69, 0.23, 2.5, 10.5, 0.34, 0.40, 0.07, 0.41, 1.24, 0.12, 0.36, 221.0],
    [0.54, 1.02, 0.32, 3.3, 16.8, 0.55, 0.71, 0.12, 0.60, 0.92, 0.20, 0.50, 157.0],
    [0.53, 1.09, 0.18, 2.3, 10.9, 0.36, 0.29, 0.12, 0.41, 2.31, 0.11, 0.27, 115.0],
];
const WINE_COUNTS: [usize; 3] = [59, 71, 48];

/// 178 rows, 13 numeric features and cultivar classes 1, 2, 3 in the
/// proportions 59 / 71 / 48. Phenols, flavanoids, proanthocyanins and od280
/// share a within-class latent factor.
pub fn wine_like(seed: u64) -> RawTable {
    let mut rng = Stream::new(seed).child(1).rng();
    let mut rows = Vec::new();
    for (c, &count) in WINE_COUNTS.iter().enumerate() {
        for _ in 0..count {
            let latent = gauss(&mut rng);
            let mut row: Vec<String> = (0..13)
                .map(|j| {
                    let loading = match j {
                        5 => 0.7,
                        6 => 0.8,
                        8 => 0.5,
                        11 => 0.6,
                        _ => 0.0,
                    };
                    let z = loading * latent + (1.0 - loading * loading).sqrt() * gauss(&mut rng);
                    let v = (WINE_MEANS[c][j] + WINE_STDS[c][j] * z).max(0.01);
                    let decimals = if j == 4 || j == 12 { 0 } else { 2 };
                    fmt(v, decimals)
                })
                .collect();
            row.push((c + 1).to_string());
            rows.push(row);
        }
    }
    let mut header: Vec<String> = WINE_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.push("cultivar".into());
    RawTable {
        header,
        rows,
        response: "cultivar".into(),
        task: Task::Classification,
    }
}

/// Name of the leaked column in [`leaked_prognosis`].
pub const LEAKED_FEATURE: &str = "time_to_recurrence";

/// 569 rows of ten measurements with a weakly predictable recurrence label,
/// plus a time-to-recurrence column that is short almost exactly when the
/// label is positive.
pub fn leaked_prognosis(seed: u64) -> RawTable {
    let mut rng = Stream::new(seed).child(2).rng();
    let names = [
        "radius",
        "texture",
        "perimeter",
        "area",
        "smoothness",
        "compactness",
        "concavity",
        "symmetry",
        "fractal_dimension",
        "tumor_size",
    ];
    let mut rows = Vec::new();
    for _ in 0..569 {
        let z: Vec<f64> = (0..names.len()).map(|_| gauss(&mut rng)).collect();
        // perimeter and area track radius
        let radius = z[0];
        let features = [
            14.0 + 3.5 * radius,
            19.0 + 4.3 * z[1],
            92.0 + 24.0 * (0.95 * radius + 0.31 * z[2]),
            650.0 + 350.0 * (0.9 * radius + 0.44 * z[3]),
            0.096 + 0.014 * z[4],
            0.10 + 0.05 * z[5],
            0.09 + 0.08 * z[6],
            0.18 + 0.03 * z[7],
            0.063 + 0.007 * z[8],
            2.8 + 1.9 * z[9],
        ];
        let score = 0.6 * radius + 0.4 * z[6] + 0.3 * z[9] - 1.0 + 0.8 * gauss(&mut rng);
        let recur = score > 0.0;
        let u: f64 = rng.random();
        let time = if recur { 1.0 + 23.0 * u } else { 20.0 + 100.0 * u };
        let mut row: Vec<String> = features.iter().map(|&v| fmt(v, 4)).collect();
        row.push(fmt(time, 1));
        row.push(if recur { "R" } else { "N" }.to_string());
        rows.push(row);
    }
    let mut header: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    header.push(LEAKED_FEATURE.into());
    header.push("outcome".into());
    RawTable {
        header,
        rows,
        response: "outcome".into(),
        task: Task::Classification,
    }
}

/// 395 students with sex (M/F), age, study time, failures, absences and a
/// first-period grade; the final grade is a noisy linear function with a
/// shift of `male_shift` points for male students.
pub fn student_grades(seed: u64, male_shift: f64) -> RawTable {
    let mut rng = Stream::new(seed).child(3).rng();
    let mut rows = Vec::new();
    for _ in 0..395 {
        let male = rng.random_bool(0.47);
        let age = rng.random_range(15..=22);
        let study = rng.random_range(1..=4);
        let failures = if rng.random_bool(0.8) { 0 } else { rng.random_range(1..=3) };
        let absences = (3.0 * gauss(&mut rng).abs() * 2.0).round() as i64;
        let g1 = (11.0 + 3.0 * gauss(&mut rng) + 0.6 * study as f64 - 1.2 * failures as f64).clamp(0.0, 20.0);
        let g3 = 0.9 * g1 + 0.3 * study as f64 - 0.8 * failures as f64 - 0.04 * absences as f64
            + if male { male_shift } else { 0.0 }
            + 1.5
            + 1.2 * gauss(&mut rng);
        rows.push(vec![
            if male { "M" } else { "F" }.to_string(),
            age.to_string(),
            study.to_string(),
            failures.to_string(),
            absences.to_string(),
            fmt(g1, 1),
            fmt(g3.clamp(0.0, 20.0), 2),
        ]);
    }
    RawTable {
        header: ["sex", "age", "studytime", "failures", "absences", "g1", "final_grade"]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        rows,
        response: "final_grade".into(),
        task: Task::Regression,
    }
}
