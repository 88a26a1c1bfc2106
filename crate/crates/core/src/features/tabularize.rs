use super::{
    engineered_features, locate_center, quad_responses, search, IntegralImage, ParamGrid, ResponseEvaluator,
    SearchMode, DEFAULT_EPSILON,
};
use crate::dataio::{GrayImage, LabeledDataset};
use crate::error::Result;
use crate::gabor::GaborOptions;
use crate::par::{self, Execution};
use crate::physfit::{self, Background, FitFailure, PfParams};

/// Physics-fit columns of a row. NaN everywhere when the fit failed.
pub type PfFeatures = PfParams;

/// One image's tabular record.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub id: String,
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub lambda: f64,
    /// Column of the response maximum.
    pub x_star: f64,
    /// Row of the response maximum.
    pub y_star: f64,
    pub q_tl: f64,
    pub q_tr: f64,
    pub q_bl: f64,
    pub q_br: f64,
    pub egf_tl_bl: f64,
    pub egf_tr_br: f64,
    pub egf_tl_tr: f64,
    pub egf_bl_br: f64,
    pub pf: Option<PfFeatures>,
    pub label: String,
}

impl FeatureRow {
    /// The 13 numeric columns between `id` and the optional fit columns.
    pub fn numeric_base(&self) -> [f64; 13] {
        [
            self.sigma_x,
            self.sigma_y,
            self.lambda,
            self.x_star,
            self.y_star,
            self.q_tl,
            self.q_tr,
            self.q_bl,
            self.q_br,
            self.egf_tl_bl,
            self.egf_tr_br,
            self.egf_tl_tr,
            self.egf_bl_br,
        ]
    }

    pub fn from_parts(id: String, b: [f64; 13], pf: Option<PfFeatures>, label: String) -> Self {
        Self {
            id,
            sigma_x: b[0],
            sigma_y: b[1],
            lambda: b[2],
            x_star: b[3],
            y_star: b[4],
            q_tl: b[5],
            q_tr: b[6],
            q_bl: b[7],
            q_br: b[8],
            egf_tl_bl: b[9],
            egf_tr_br: b[10],
            egf_tl_tr: b[11],
            egf_bl_br: b[12],
            pf,
            label,
        }
    }

    /// Numeric value by feature-table column name.
    pub fn value(&self, column: &str) -> Option<f64> {
        if let Some(i) = crate::dataio::BASE_COLUMNS[1..].iter().position(|c| *c == column) {
            return Some(self.numeric_base()[i]);
        }
        let i = crate::dataio::PF_COLUMNS.iter().position(|c| *c == column)?;
        self.pf.map(|p| p.as_array()[i])
    }

    /// True when physics-fit columns exist and are all finite.
    pub fn has_valid_pf(&self) -> bool {
        self.pf.is_some_and(|p| p.is_finite())
    }
}

/// Settings for [`tabularize`].
#[derive(Debug, Clone)]
pub struct TabularizeConfig {
    /// `None` picks the default grid for each image's size.
    pub grid: Option<ParamGrid>,
    pub mode: SearchMode,
    pub gabor: GaborOptions,
    pub epsilon: f64,
    pub with_pf: bool,
    pub background: Background,
}

impl Default for TabularizeConfig {
    fn default() -> Self {
        Self {
            grid: None,
            mode: SearchMode::TwoStep,
            gabor: GaborOptions::default(),
            epsilon: DEFAULT_EPSILON,
            with_pf: false,
            background: Background::MedianColumns,
        }
    }
}

/// Rows plus per-row flags that have no column in the table.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tabulated {
    pub rows: Vec<FeatureRow>,
    /// Per-row degenerate-quadrant flags in tl, tr, bl, br order.
    pub degenerate: Vec<[bool; 4]>,
    /// Rows whose physics fit was rejected, with the reason.
    pub pf_failures: Vec<(String, FitFailure)>,
    pub convolutions: usize,
}

/// Gabor quad transform of one image (no label, no physics fit).
pub fn transform_image(img: &GrayImage, cfg: &TabularizeConfig) -> Result<(FeatureRow, [bool; 4], usize)> {
    let default_grid;
    let grid = match &cfg.grid {
        Some(g) => g,
        None => {
            default_grid = ParamGrid::default_for(img.width(), img.height());
            &default_grid
        }
    };
    let ev = ResponseEvaluator::new(img, grid, cfg.gabor)?;
    let opt = search(&ev, grid, cfg.mode, Execution::Sequential)?;
    let field = ev.field(opt.sigma_x, opt.sigma_y, opt.lambda)?;
    let center = locate_center(&field);
    let iu = IntegralImage::from_field(&field);
    // sigma_y scales the kernel along columns, sigma_x along rows.
    let q = quad_responses(&iu, center, (opt.sigma_y, opt.sigma_x));
    let e = engineered_features(&q, cfg.epsilon);
    let base = [
        opt.sigma_x,
        opt.sigma_y,
        opt.lambda,
        center.0 as f64,
        center.1 as f64,
        q.tl,
        q.tr,
        q.bl,
        q.br,
        e[0],
        e[1],
        e[2],
        e[3],
    ];
    Ok((FeatureRow::from_parts(String::new(), base, None, String::new()), q.degenerate, opt.convolutions))
}

/// One row per image, in dataset order.
pub fn tabularize(ds: &LabeledDataset, cfg: &TabularizeConfig, exec: Execution) -> Result<Tabulated> {
    let results = par::try_map_range(exec, ds.len(), |i| {
        let img = &ds.images()[i];
        let (mut row, degenerate, convs) = transform_image(img, cfg)?;
        row.id = ds.names()[i].clone();
        row.label = ds.labels()[i].clone();
        let mut failure = None;
        if cfg.with_pf {
            let fit = physfit::fit_image(img, cfg.background)?;
            failure = fit.failure;
            row.pf = Some(fit.features());
        }
        Ok::<_, crate::error::Error>((row, degenerate, convs, failure))
    })?;
    let mut out = Tabulated::default();
    for (row, degenerate, convs, failure) in results {
        if let Some(f) = failure {
            out.pf_failures.push((row.id.clone(), f));
        }
        out.rows.push(row);
        out.degenerate.push(degenerate);
        out.convolutions += convs;
    }
    Ok(out)
}
