//! Time-domain integration of K-power systems in coupled form, input
//! signals, and trajectory error metrics.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::sysmodel::KPowerSystem;

/// A scalar input signal u(t).
#[derive(Debug, Clone)]
pub enum InputSignal {
    Zero,
    Step,
    /// `u(t) = t cos t`
    TCos,
    /// `u(t) = sin(0.5 t) exp(-0.5 t)`
    SinDecay,
    Expr(expr::Expr),
}

impl InputSignal {
    /// Builtin signal by name: `zero`, `step`, `tcos`, `sindecay`.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "zero" => Ok(Self::Zero),
            "step" => Ok(Self::Step),
            "tcos" => Ok(Self::TCos),
            "sindecay" => Ok(Self::SinDecay),
            other => Err(Error::UnknownInput(other.into())),
        }
    }

    /// Builtin name, or a custom expression in `t` (e.g. `sin(2*t) * exp(-t)`).
    pub fn parse(spec: &str) -> Result<Self> {
        match Self::by_name(spec) {
            Ok(sig) => Ok(sig),
            Err(_) => Ok(Self::Expr(expr::Expr::parse(spec)?)),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Step => 1.0,
            Self::TCos => t * t.cos(),
            Self::SinDecay => (0.5 * t).sin() * (-0.5 * t).exp(),
            Self::Expr(e) => e.eval(t),
        }
    }
}

/// Output trajectory on a uniform time grid, with optional state snapshots.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub outputs: Vec<f64>,
    pub states: Option<Vec<Vec<f64>>>,
}

impl Trajectory {
    /// CSV export `t,y`.
    pub fn to_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,y")?;
        for (t, y) in self.times.iter().zip(&self.outputs) {
            writeln!(
                w,
                "{},{}",
                crate::transfer::canonical_freq(*t),
                crate::transfer::canonical_freq(*y)
            )?;
        }
        Ok(())
    }
}

fn derivative(
    sys: &KPowerSystem,
    x: &[DVector<f64>],
    u: f64,
    out: &mut [DVector<f64>],
) {
    let k = sys.k();
    out[0] = sys.a(0) * &x[0];
    out[0].axpy(u, sys.b1(), 1.0);
    for j in 1..k {
        out[j] = sys.a(j) * &x[j];
        // coupling drive enters scaled by the input
        out[j].gemv(u, sys.coupling(j - 1), &x[j - 1], 1.0);
    }
}

/// Classical fixed-step 4th-order integration of the coupled cascade from
/// zero initial state. The input is evaluated at the stage times.
pub fn integrate(
    sys: &KPowerSystem,
    input: &InputSignal,
    t_final: f64,
    dt: f64,
) -> Result<Trajectory> {
    integrate_recording(sys, input, t_final, dt, false)
}

/// As [`integrate`], optionally keeping a state snapshot per step.
pub fn integrate_recording(
    sys: &KPowerSystem,
    input: &InputSignal,
    t_final: f64,
    dt: f64,
    record_states: bool,
) -> Result<Trajectory> {
    if !(dt > 0.0 && dt.is_finite()) || !(t_final > 0.0 && t_final.is_finite()) {
        return Err(Error::Numeric(format!(
            "need positive finite dt and t_final, got dt = {dt}, t_final = {t_final}"
        )));
    }
    let steps = (t_final / dt).round().max(1.0) as usize;
    let k = sys.k();
    let mut x: Vec<DVector<f64>> = sys.dims().iter().map(|&d| DVector::zeros(d)).collect();
    let zero = || -> Vec<DVector<f64>> { sys.dims().iter().map(|&d| DVector::zeros(d)).collect() };
    let mut k1 = zero();
    let mut k2 = zero();
    let mut k3 = zero();
    let mut k4 = zero();
    let mut stage = zero();

    let output = |x: &[DVector<f64>]| -> f64 { (sys.ck() * &x[k - 1])[(0, 0)] };
    let flat = |x: &[DVector<f64>]| -> Vec<f64> {
        x.iter().flat_map(|v| v.iter().copied()).collect()
    };

    let mut times = Vec::with_capacity(steps + 1);
    let mut outputs = Vec::with_capacity(steps + 1);
    let mut states = if record_states { Some(Vec::with_capacity(steps + 1)) } else { None };
    times.push(0.0);
    outputs.push(output(&x));
    if let Some(s) = states.as_mut() {
        s.push(flat(&x));
    }

    for m in 0..steps {
        let t = m as f64 * dt;
        let u0 = input.eval(t);
        let uh = input.eval(t + dt / 2.0);
        let u1 = input.eval(t + dt);

        derivative(sys, &x, u0, &mut k1);
        for j in 0..k {
            stage[j] = &x[j] + &k1[j] * (dt / 2.0);
        }
        derivative(sys, &stage, uh, &mut k2);
        for j in 0..k {
            stage[j] = &x[j] + &k2[j] * (dt / 2.0);
        }
        derivative(sys, &stage, uh, &mut k3);
        for j in 0..k {
            stage[j] = &x[j] + &k3[j] * dt;
        }
        derivative(sys, &stage, u1, &mut k4);
        for j in 0..k {
            let incr = (&k1[j] + &k2[j] * 2.0 + &k3[j] * 2.0 + &k4[j]) * (dt / 6.0);
            x[j] += incr;
        }

        let t_next = (m + 1) as f64 * dt;
        let y = output(&x);
        if !y.is_finite() || x.iter().any(|v| v.iter().any(|c| !c.is_finite())) {
            return Err(Error::Divergence { t: t_next });
        }
        times.push(t_next);
        outputs.push(y);
        if let Some(s) = states.as_mut() {
            s.push(flat(&x));
        }
    }
    Ok(Trajectory {
        times,
        outputs,
        states,
    })
}

/// Pointwise and global deviation between two trajectories on the same grid.
#[derive(Debug, Clone)]
pub struct ErrorSeries {
    /// `|y_ref - y_test| / max(|y_ref|, floor)` per sample, with
    /// `floor = 1e-12 * max |y_ref|`.
    pub pointwise: Vec<f64>,
    pub max: f64,
    /// `||y_ref - y_test||_2 / ||y_ref||_2`.
    pub l2: f64,
}

impl ErrorSeries {
    /// CSV export `t,e`.
    pub fn to_csv<W: std::io::Write>(&self, times: &[f64], mut w: W) -> Result<()> {
        writeln!(w, "t,e")?;
        for (t, e) in times.iter().zip(&self.pointwise) {
            writeln!(
                w,
                "{},{}",
                crate::transfer::canonical_freq(*t),
                crate::transfer::canonical_freq(*e)
            )?;
        }
        Ok(())
    }
}

pub fn relative_error(y_ref: &Trajectory, y_test: &Trajectory) -> Result<ErrorSeries> {
    if y_ref.times.len() != y_test.times.len()
        || y_ref
            .times
            .iter()
            .zip(&y_test.times)
            .any(|(a, b)| a != b)
    {
        return Err(Error::TimeGridMismatch(format!(
            "{} vs {} samples",
            y_ref.times.len(),
            y_test.times.len()
        )));
    }
    let peak = y_ref.outputs.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    let floor = 1e-12 * peak;
    let mut pointwise = Vec::with_capacity(y_ref.outputs.len());
    let mut max = 0.0f64;
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (r, t) in y_ref.outputs.iter().zip(&y_test.outputs) {
        let diff = (r - t).abs();
        let e = diff / r.abs().max(floor).max(f64::MIN_POSITIVE);
        max = max.max(e);
        num += diff * diff;
        den += r * r;
        pointwise.push(e);
    }
    let l2 = if den > 0.0 {
        (num / den).sqrt()
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(ErrorSeries { pointwise, max, l2 })
}

/// A tiny arithmetic expression language for custom inputs.
pub mod expr {
    use crate::error::{Error, Result};

    #[derive(Debug, Clone)]
    pub enum Expr {
        Const(f64),
        Time,
        Neg(Box<Expr>),
        Add(Box<Expr>, Box<Expr>),
        Sub(Box<Expr>, Box<Expr>),
        Mul(Box<Expr>, Box<Expr>),
        Div(Box<Expr>, Box<Expr>),
        Pow(Box<Expr>, Box<Expr>),
        Call(Func, Box<Expr>),
    }

    #[derive(Debug, Clone, Copy)]
    pub enum Func {
        Sin,
        Cos,
        Tan,
        Exp,
        Ln,
        Sqrt,
        Abs,
    }

    impl Expr {
        pub fn parse(src: &str) -> Result<Self> {
            let tokens = tokenize(src)?;
            let mut p = Parser { tokens, pos: 0 };
            let e = p.expr()?;
            if p.pos != p.tokens.len() {
                return Err(Error::BadExpression(format!(
                    "unexpected trailing input in '{src}'"
                )));
            }
            Ok(e)
        }

        pub fn eval(&self, t: f64) -> f64 {
            match self {
                Expr::Const(c) => *c,
                Expr::Time => t,
                Expr::Neg(e) => -e.eval(t),
                Expr::Add(a, b) => a.eval(t) + b.eval(t),
                Expr::Sub(a, b) => a.eval(t) - b.eval(t),
                Expr::Mul(a, b) => a.eval(t) * b.eval(t),
                Expr::Div(a, b) => a.eval(t) / b.eval(t),
                Expr::Pow(a, b) => a.eval(t).powf(b.eval(t)),
                Expr::Call(f, e) => {
                    let x = e.eval(t);
                    match f {
                        Func::Sin => x.sin(),
                        Func::Cos => x.cos(),
                        Func::Tan => x.tan(),
                        Func::Exp => x.exp(),
                        Func::Ln => x.ln(),
                        Func::Sqrt => x.sqrt(),
                        Func::Abs => x.abs(),
                    }
                }
            }
        }
    }

    #[derive(Debug, Clone, PartialEq)]
    enum Tok {
        Num(f64),
        Ident(String),
        Plus,
        Minus,
        Star,
        Slash,
        Caret,
        LParen,
        RParen,
    }

    fn tokenize(src: &str) -> Result<Vec<Tok>> {
        let mut out = Vec::new();
        let bytes: Vec<char> = src.chars().collect();
        let mut i = 0;
        while i < bytes.len() {
            let c = bytes[i];
            match c {
                ' ' | '\t' => i += 1,
                '+' => {
                    out.push(Tok::Plus);
                    i += 1;
                }
                '-' => {
                    out.push(Tok::Minus);
                    i += 1;
                }
                '*' => {
                    out.push(Tok::Star);
                    i += 1;
                }
                '/' => {
                    out.push(Tok::Slash);
                    i += 1;
                }
                '^' => {
                    out.push(Tok::Caret);
                    i += 1;
                }
                '(' => {
                    out.push(Tok::LParen);
                    i += 1;
                }
                ')' => {
                    out.push(Tok::RParen);
                    i += 1;
                }
                c if c.is_ascii_digit() || c == '.' => {
                    let start = i;
                    while i < bytes.len()
                        && (bytes[i].is_ascii_digit()
                            || bytes[i] == '.'
                            || bytes[i] == 'e'
                            || bytes[i] == 'E'
                            || ((bytes[i] == '+' || bytes[i] == '-')
                                && i > start
                                && (bytes[i - 1] == 'e' || bytes[i - 1] == 'E')))
                    {
                        i += 1;
                    }
                    let text: String = bytes[start..i].iter().collect();
                    let v = text
                        .parse::<f64>()
                        .map_err(|_| Error::BadExpression(format!("bad number '{text}'")))?;
                    out.push(Tok::Num(v));
                }
                c if c.is_ascii_alphabetic() => {
                    let start = i;
                    while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                        i += 1;
                    }
                    out.push(Tok::Ident(bytes[start..i].iter().collect()));
                }
                other => {
                    return Err(Error::BadExpression(format!("unexpected character '{other}'")));
                }
            }
        }
        Ok(out)
    }

    struct Parser {
        tokens: Vec<Tok>,
        pos: usize,
    }

    impl Parser {
        fn peek(&self) -> Option<&Tok> {
            self.tokens.get(self.pos)
        }

        fn next(&mut self) -> Option<Tok> {
            let t = self.tokens.get(self.pos).cloned();
            if t.is_some() {
                self.pos += 1;
            }
            t
        }

        fn expr(&mut self) -> Result<Expr> {
            let mut lhs = self.term()?;
            while let Some(tok) = self.peek() {
                match tok {
                    Tok::Plus => {
                        self.next();
                        lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                    }
                    Tok::Minus => {
                        self.next();
                        lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                    }
                    _ => break,
                }
            }
            Ok(lhs)
        }

        fn term(&mut self) -> Result<Expr> {
            let mut lhs = self.unary()?;
            while let Some(tok) = self.peek() {
                match tok {
                    Tok::Star => {
                        self.next();
                        lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                    }
                    Tok::Slash => {
                        self.next();
                        lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                    }
                    _ => break,
                }
            }
            Ok(lhs)
        }

        fn unary(&mut self) -> Result<Expr> {
            if matches!(self.peek(), Some(Tok::Minus)) {
                self.next();
                return Ok(Expr::Neg(Box::new(self.unary()?)));
            }
            self.power()
        }

        fn power(&mut self) -> Result<Expr> {
            let base = self.atom()?;
            if matches!(self.peek(), Some(Tok::Caret)) {
                self.next();
                // right-associative, unary exponents allowed
                let exp = self.unary()?;
                return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
            }
            Ok(base)
        }

        fn atom(&mut self) -> Result<Expr> {
            match self.next() {
                Some(Tok::Num(v)) => Ok(Expr::Const(v)),
                Some(Tok::LParen) => {
                    let e = self.expr()?;
                    match self.next() {
                        Some(Tok::RParen) => Ok(e),
                        _ => Err(Error::BadExpression("missing closing parenthesis".into())),
                    }
                }
                Some(Tok::Ident(name)) => match name.as_str() {
                    "t" => Ok(Expr::Time),
                    "pi" => Ok(Expr::Const(std::f64::consts::PI)),
                    "e" => Ok(Expr::Const(std::f64::consts::E)),
                    func => {
                        let f = match func {
                            "sin" => Func::Sin,
                            "cos" => Func::Cos,
                            "tan" => Func::Tan,
                            "exp" => Func::Exp,
                            "ln" | "log" => Func::Ln,
                            "sqrt" => Func::Sqrt,
                            "abs" => Func::Abs,
                            other => {
                                return Err(Error::BadExpression(format!(
                                    "unknown identifier '{other}'"
                                )))
                            }
                        };
                        match self.next() {
                            Some(Tok::LParen) => {
                                let arg = self.expr()?;
                                match self.next() {
                                    Some(Tok::RParen) => Ok(Expr::Call(f, Box::new(arg))),
                                    _ => Err(Error::BadExpression(
                                        "missing closing parenthesis".into(),
                                    )),
                                }
                            }
                            _ => Err(Error::BadExpression(format!(
                                "function '{func}' needs parentheses"
                            ))),
                        }
                    }
                },
                other => Err(Error::BadExpression(format!("unexpected token {other:?}"))),
            }
        }
    }
}
