//! Dependency-free SVG step plots of performance profiles. Output is plain
//! text with fixed-precision coordinates, so repeated renders are
//! byte-identical and diff cleanly.

use optprofiler_core::scoring::Profile;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 150.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

struct Frame {
    r_max: f64,
}

impl Frame {
    fn x(&self, tau: f64) -> f64 {
        let span = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        MARGIN_LEFT + (tau - 1.0) / (self.r_max - 1.0) * span
    }

    fn y(&self, rho: f64) -> f64 {
        let span = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        HEIGHT - MARGIN_BOTTOM - rho * span
    }
}

fn step_path(profile: &Profile, frame: &Frame) -> String {
    let mut d = String::new();
    let mut started = false;
    for (tau, rho) in &profile.breakpoints {
        let tau = tau.min(frame.r_max);
        if !started {
            d.push_str(&format!("M {:.2} {:.2}", frame.x(tau), frame.y(*rho)));
            started = true;
        } else {
            // horizontal run at the previous level, then the jump
            d.push_str(&format!(" H {:.2} V {:.2}", frame.x(tau), frame.y(*rho)));
        }
        if tau >= frame.r_max {
            break;
        }
    }
    if !started {
        d.push_str(&format!("M {:.2} {:.2}", frame.x(1.0), frame.y(0.0)));
    }
    d.push_str(&format!(" H {:.2}", frame.x(frame.r_max)));
    d
}

/// One curve per profile over τ ∈ [1, r_max], ρ ∈ [0, 1].
pub fn render_profiles_svg(title: &str, profiles: &[Profile], r_max: f64) -> String {
    let frame = Frame { r_max };
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n",
        (MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2.0,
        title
    ));

    // gridlines and ticks
    for i in 0..=4 {
        let rho = i as f64 / 4.0;
        let y = frame.y(rho);
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>\n",
            frame.x(1.0),
            frame.x(r_max)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{rho:.2}</text>\n",
            frame.x(1.0) - 8.0,
            y + 4.0
        ));
    }
    for i in 0..=5 {
        let tau = 1.0 + (r_max - 1.0) * i as f64 / 5.0;
        let x = frame.x(tau);
        svg.push_str(&format!(
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>\n",
            frame.y(0.0),
            frame.y(1.0)
        ));
        svg.push_str(&format!(
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{tau:.2}</text>\n",
            frame.y(0.0) + 18.0
        ));
    }

    // axes
    svg.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        frame.x(1.0),
        frame.y(0.0),
        frame.x(r_max),
        frame.y(0.0)
    ));
    svg.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        frame.x(1.0),
        frame.y(0.0),
        frame.x(1.0),
        frame.y(1.0)
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">performance ratio τ</text>\n",
        (frame.x(1.0) + frame.x(r_max)) / 2.0,
        HEIGHT - 8.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">fraction of workloads ρ(τ)</text>\n",
        (frame.y(0.0) + frame.y(1.0)) / 2.0,
        (frame.y(0.0) + frame.y(1.0)) / 2.0
    ));

    // curves and legend
    for (k, profile) in profiles.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        svg.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            step_path(profile, &frame)
        ));
        let ly = MARGIN_TOP + 16.0 * k as f64;
        let lx = WIDTH - MARGIN_RIGHT + 12.0;
        svg.push_str(&format!(
            "<line x1=\"{lx:.2}\" y1=\"{ly:.2}\" x2=\"{:.2}\" y2=\"{ly:.2}\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            lx + 22.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>\n",
            lx + 28.0,
            ly + 4.0,
            profile.algorithm
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
