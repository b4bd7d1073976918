use nalgebra::DMatrix;

/// Whether outliers are whole observations (rows of `S`) or single entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutlierMode {
    Row,
    Element,
}

impl std::fmt::Display for OutlierMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutlierMode::Row => "row",
            OutlierMode::Element => "element",
        })
    }
}

impl std::str::FromStr for OutlierMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "row" | "r" => Ok(OutlierMode::Row),
            "element" | "e" => Ok(OutlierMode::Element),
            other => Err(format!("unknown outlier mode '{other}' (expected row or element)")),
        }
    }
}

/// Indices of flagged outliers, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Flagged {
    Rows(Vec<usize>),
    Elements(Vec<(usize, usize)>),
}

impl Flagged {
    pub fn len(&self) -> usize {
        match self {
            Flagged::Rows(r) => r.len(),
            Flagged::Elements(e) => e.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Distinct rows touched by the flagged set, ascending.
    pub fn rows(&self) -> Vec<usize> {
        match self {
            Flagged::Rows(r) => r.clone(),
            Flagged::Elements(e) => {
                let mut rows: Vec<usize> = e.iter().map(|&(i, _)| i).collect();
                rows.sort_unstable();
                rows.dedup();
                rows
            }
        }
    }
}

/// The `n × d` mean-shift outlier matrix `S`, stored dense, with its row and
/// element supports cached.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierMatrix {
    values: DMatrix<f64>,
    row_support: Vec<usize>,
    element_support: Vec<(usize, usize)>,
}

impl OutlierMatrix {
    pub fn new(values: DMatrix<f64>) -> Self {
        let mut element_support = Vec::new();
        let mut row_support = Vec::new();
        for i in 0..values.nrows() {
            let before = element_support.len();
            for j in 0..values.ncols() {
                if values[(i, j)] != 0.0 {
                    element_support.push((i, j));
                }
            }
            if element_support.len() > before {
                row_support.push(i);
            }
        }
        Self {
            values,
            row_support,
            element_support,
        }
    }

    pub fn zeros(n: usize, d: usize) -> Self {
        Self::new(DMatrix::zeros(n, d))
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }

    /// Rows with any nonzero entry (`‖S‖_{2,0}` of them), ascending.
    pub fn row_support(&self) -> &[usize] {
        &self.row_support
    }

    /// Nonzero entries (`‖S‖_0` of them) in row-major order.
    pub fn element_support(&self) -> &[(usize, usize)] {
        &self.element_support
    }

    pub fn flagged(&self, mode: OutlierMode) -> Flagged {
        match mode {
            OutlierMode::Row => Flagged::Rows(self.row_support.clone()),
            OutlierMode::Element => Flagged::Elements(self.element_support.clone()),
        }
    }

    /// Number of nonzero rows or entries, depending on `mode`.
    pub fn support_size(&self, mode: OutlierMode) -> usize {
        match mode {
            OutlierMode::Row => self.row_support.len(),
            OutlierMode::Element => self.element_support.len(),
        }
    }
}
