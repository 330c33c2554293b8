//! Parsers for the small textual grammars the CLI flags use: arithmetic
//! sets, multiplicative rules, weight specs, finite systems, polynomial
//! matrices, and observables.

use arithlab::characters::DirichletCharacter;
use arithlab::ergodic::{ErgodicError, FiniteSystem, IntPolynomial, Observable, PolynomialMatrix};
use arithlab::fourier::e;
use arithlab::multiplicative::MultiplicativeRule;
use arithlab::sets::{ArithmeticSet, WeightVector};
use arithlab::sieve::FactorTable;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Integers accept an optional power form `B^E` (e.g. `2^17`).
pub fn parse_u64(s: &str) -> Result<u64, String> {
    let s = s.trim();
    if let Some((base, exp)) = s.split_once('^') {
        let base: u64 = base
            .trim()
            .parse()
            .map_err(|_| format!("bad integer base in '{s}'"))?;
        let exp: u32 = exp
            .trim()
            .parse()
            .map_err(|_| format!("bad integer exponent in '{s}'"))?;
        base.checked_pow(exp)
            .ok_or_else(|| format!("'{s}' overflows a 64-bit integer"))
    } else {
        s.parse().map_err(|_| format!("bad integer '{s}'"))
    }
}

pub fn parse_u64_list(s: &str) -> Result<Vec<u64>, String> {
    s.split(',')
        .filter(|part| !part.trim().is_empty())
        .map(parse_u64)
        .collect::<Result<Vec<_>, _>>()
        .and_then(|list| {
            if list.is_empty() {
                Err(format!("empty integer list '{s}'"))
            } else {
                Ok(list)
            }
        })
}

pub fn parse_i64_list(s: &str) -> Result<Vec<i64>, String> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<i64>()
                .map_err(|_| format!("bad integer '{part}'"))
        })
        .collect()
}

fn parse_f64(s: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("bad number '{s}'"))
}

/// `NUM/DEN` or a bare `1`.
pub fn parse_beta(s: &str) -> Result<(u64, u64), String> {
    match s.split_once('/') {
        Some((num, den)) => Ok((parse_u64(num)?, parse_u64(den)?)),
        None => {
            let v = parse_u64(s)?;
            Ok((v, 1))
        }
    }
}

/// Set grammar:
/// `omega:R1,R2:B` | `bigomega:R1,R2:B` | `omega-frac:ALPHA:LO-HI,LO-HI` |
/// `bigomega-frac:ALPHA:LO-HI,...` | `squarefree` | `evens` | `all`,
/// optionally followed by `+C` for a right shift by C.
pub fn parse_set(spec: &str) -> Result<ArithmeticSet, String> {
    let spec = spec.trim();
    let (body, shift) = match spec.rfind('+') {
        Some(pos) if spec[pos + 1..].chars().all(|c| c.is_ascii_digit())
            && !spec[pos + 1..].is_empty() =>
        {
            (&spec[..pos], parse_u64(&spec[pos + 1..])?)
        }
        _ => (spec, 0),
    };
    let set = match body {
        "all" => ArithmeticSet::omega_mod(&[0], 1).map_err(|e| e.to_string())?,
        "evens" => ArithmeticSet::evens(),
        "squarefree" => ArithmeticSet::squarefree(),
        _ => {
            let mut parts = body.splitn(3, ':');
            let kind = parts.next().unwrap_or_default();
            match kind {
                "omega" | "bigomega" => {
                    let residues = parse_u64_list(
                        parts.next().ok_or_else(|| missing_arg(body, "residues"))?,
                    )?;
                    let modulus =
                        parse_u64(parts.next().ok_or_else(|| missing_arg(body, "modulus"))?)?;
                    let built = if kind == "omega" {
                        ArithmeticSet::omega_mod(&residues, modulus)
                    } else {
                        ArithmeticSet::bigomega_mod(&residues, modulus)
                    };
                    built.map_err(|e| e.to_string())?
                }
                "omega-frac" | "bigomega-frac" => {
                    let alpha =
                        parse_f64(parts.next().ok_or_else(|| missing_arg(body, "alpha"))?)?;
                    let intervals = parts
                        .next()
                        .ok_or_else(|| missing_arg(body, "intervals"))?
                        .split(',')
                        .map(|pair| {
                            let (lo, hi) = pair
                                .split_once('-')
                                .ok_or_else(|| format!("interval '{pair}' is not LO-HI"))?;
                            Ok((parse_f64(lo)?, parse_f64(hi)?))
                        })
                        .collect::<Result<Vec<_>, String>>()?;
                    let built = if kind == "omega-frac" {
                        ArithmeticSet::omega_frac(intervals, alpha)
                    } else {
                        ArithmeticSet::bigomega_frac(intervals, alpha)
                    };
                    built.map_err(|e| e.to_string())?
                }
                _ => return Err(format!("unknown set kind '{kind}' in '{spec}'")),
            }
        }
    };
    Ok(if shift > 0 { set.with_shift(shift) } else { set })
}

/// Rule grammar: `one` | `liouville` | `mobius` | `squarefree` |
/// `omega-root:PHASE` | `bigomega-root:PHASE` | `unimodular-omega:ALPHA` |
/// `unimodular-bigomega:ALPHA` | `power-t:T` | `character:Q:INDEX`.
pub fn parse_rule(spec: &str) -> Result<MultiplicativeRule, String> {
    let mut parts = spec.trim().splitn(3, ':');
    let kind = parts.next().unwrap_or_default();
    let mut arg = || parts.next().ok_or_else(|| missing_arg(spec, "argument"));
    Ok(match kind {
        "one" => MultiplicativeRule::one(),
        "liouville" => MultiplicativeRule::liouville(),
        "mobius" => MultiplicativeRule::mobius(),
        "squarefree" => MultiplicativeRule::squarefree_indicator(),
        "omega-root" => MultiplicativeRule::omega_root(parse_f64(arg()?)?),
        "bigomega-root" => MultiplicativeRule::bigomega_root(parse_f64(arg()?)?),
        "unimodular-omega" => MultiplicativeRule::unimodular_omega(parse_f64(arg()?)?),
        "unimodular-bigomega" => MultiplicativeRule::unimodular_bigomega(parse_f64(arg()?)?),
        "power-t" => MultiplicativeRule::power_t(parse_f64(arg()?)?),
        "character" => {
            let q = parse_u64(arg()?)?;
            let index: usize = arg()?
                .parse()
                .map_err(|_| format!("bad character index in '{spec}'"))?;
            let mut all = DirichletCharacter::all_mod(q).map_err(|err| err.to_string())?;
            if index >= all.len() {
                return Err(format!(
                    "character index {index} out of range; modulus {q} has {} characters",
                    all.len()
                ));
            }
            MultiplicativeRule::character(all.swap_remove(index))
        }
        _ => return Err(format!("unknown rule '{spec}'")),
    })
}

/// A weight sequence over `[1, N]`: a multiplicative rule, a set indicator,
/// a centered set indicator, the constant 1, or seeded unimodular noise.
pub enum WeightSpec {
    Ones,
    Random,
    Rule(MultiplicativeRule),
    Set(ArithmeticSet),
    Centered(ArithmeticSet),
}

impl WeightSpec {
    pub fn parse(spec: &str) -> Result<Self, String> {
        let spec = spec.trim();
        Ok(match spec {
            "ones" => WeightSpec::Ones,
            "random" => WeightSpec::Random,
            _ => match spec.split_once(':') {
                Some(("set", rest)) => WeightSpec::Set(parse_set(rest)?),
                Some(("centered", rest)) => WeightSpec::Centered(parse_set(rest)?),
                Some(("rule", rest)) => WeightSpec::Rule(parse_rule(rest)?),
                // Bare rule names stay accepted so `--weight liouville` works.
                _ => WeightSpec::Rule(parse_rule(spec)?),
            },
        })
    }

    /// Largest integer the factor table must cover to realize this weight.
    pub fn table_need(&self, n: u64) -> u64 {
        match self {
            WeightSpec::Ones | WeightSpec::Random => 0,
            _ => n,
        }
    }

    pub fn realize(
        &self,
        table: &FactorTable,
        n: u64,
        seed: u64,
    ) -> Result<WeightVector, String> {
        match self {
            WeightSpec::Ones => Ok(WeightVector::ones(n)),
            WeightSpec::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let values: Vec<Complex64> = (0..n).map(|_| e(rng.gen::<f64>())).collect();
                WeightVector::from_values(values, 1.0).map_err(|err| err.to_string())
            }
            WeightSpec::Rule(rule) => {
                WeightVector::from_rule(rule, table, n).map_err(|err| err.to_string())
            }
            WeightSpec::Set(set) => {
                WeightVector::from_set(set, table, n).map_err(|err| err.to_string())
            }
            WeightSpec::Centered(set) => {
                WeightVector::from_centered_set(set, table, n).map_err(|err| err.to_string())
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            WeightSpec::Ones => "ones".to_string(),
            WeightSpec::Random => "random".to_string(),
            WeightSpec::Rule(rule) => format!("rule:{}", rule.label()),
            WeightSpec::Set(set) => format!("set:{}", set.label()),
            WeightSpec::Centered(set) => format!("centered:{}", set.label()),
        }
    }
}

/// A system spec that failed: either the text never parsed, or it parsed
/// but construction was rejected (the latter can be a budget error, which
/// the caller maps to a different exit code).
pub enum SystemParseError {
    Grammar(String),
    Build(ErgodicError),
}

impl From<String> for SystemParseError {
    fn from(msg: String) -> Self {
        SystemParseError::Grammar(msg)
    }
}

/// System grammar: `rotation:M1,M2,..:S1,S2,..[;T1,T2,..]` (one shift row
/// per commuting map) or `skew:M:A`.
pub fn parse_system(spec: &str) -> Result<FiniteSystem, SystemParseError> {
    let spec = spec.trim();
    let (kind, rest) = spec
        .split_once(':')
        .ok_or_else(|| format!("system '{spec}' needs arguments"))?;
    match kind {
        "rotation" => {
            let (mods, shifts) = rest
                .split_once(':')
                .ok_or_else(|| missing_arg(spec, "shift rows"))?;
            let moduli = parse_u64_list(mods)?;
            let rows = shifts
                .split(';')
                .map(parse_i64_list)
                .collect::<Result<Vec<_>, _>>()?;
            FiniteSystem::make_product_rotation(&moduli, &rows).map_err(SystemParseError::Build)
        }
        "skew" => {
            let (m, a) = rest
                .split_once(':')
                .ok_or_else(|| missing_arg(spec, "shift"))?;
            let m = parse_u64(m)?;
            let a: i64 = a
                .trim()
                .parse()
                .map_err(|_| format!("bad skew shift in '{spec}'"))?;
            FiniteSystem::make_skew_product(m, a).map_err(SystemParseError::Build)
        }
        _ => Err(SystemParseError::Grammar(format!(
            "unknown system kind '{kind}'"
        ))),
    }
}

/// One integer polynomial in `n`, e.g. `n`, `2n^2-n`, `n^3+4`.
pub fn parse_poly(text: &str) -> Result<IntPolynomial, String> {
    let cleaned: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if cleaned.is_empty() {
        return Err("empty polynomial".to_string());
    }
    let mut coeffs: Vec<i64> = Vec::new();
    let normalized = cleaned.replace('-', "+-");
    for term in normalized.split('+') {
        if term.is_empty() {
            continue;
        }
        let (coeff_text, degree) = match term.find('n') {
            Some(pos) => {
                let degree = match term[pos + 1..].strip_prefix('^') {
                    Some(exp) => exp
                        .parse::<usize>()
                        .map_err(|_| format!("bad exponent in term '{term}'"))?,
                    None if term[pos + 1..].is_empty() => 1,
                    None => return Err(format!("malformed term '{term}'")),
                };
                (&term[..pos], degree)
            }
            None => (term, 0),
        };
        let coeff: i64 = match coeff_text {
            "" => 1,
            "-" => -1,
            _ => coeff_text
                .parse()
                .map_err(|_| format!("bad coefficient in term '{term}'"))?,
        };
        if degree > 16 {
            return Err(format!("degree {degree} is unreasonably large"));
        }
        if coeffs.len() <= degree {
            coeffs.resize(degree + 1, 0);
        }
        coeffs[degree] = coeffs[degree]
            .checked_add(coeff)
            .ok_or_else(|| format!("coefficient overflow in '{text}'"))?;
    }
    Ok(IntPolynomial::new(coeffs))
}

/// Matrix grammar: rows split on `;`, columns on `,`: `n,n^2;2n,n`.
pub fn parse_polys(spec: &str) -> Result<PolynomialMatrix, String> {
    let rows = spec
        .split(';')
        .map(|row| row.split(',').map(parse_poly).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    PolynomialMatrix::from_rows(rows).map_err(|err| err.to_string())
}

/// Observable grammar, `;`-separated list of:
/// `one` | `random` | `indicator:P1,P2,..` | `coord:AXIS:FREQ`.
/// A single entry is replicated to fill all `columns`.
pub fn parse_observables(
    spec: &str,
    sys: &FiniteSystem,
    columns: usize,
    seed: u64,
) -> Result<Vec<Observable>, String> {
    // Offset keeps observable noise decoupled from weight noise at equal
    // seeds.
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x0b5e));
    let mut obs = Vec::new();
    for entry in spec.split(';') {
        let entry = entry.trim();
        let built = match entry {
            "one" => Observable::constant(sys.size(), Complex64::new(1.0, 0.0)),
            "random" => {
                let values: Vec<Complex64> =
                    (0..sys.size()).map(|_| e(rng.gen::<f64>())).collect();
                Observable::new(values, 1.0)
            }
            _ => match entry.split_once(':') {
                Some(("indicator", rest)) => {
                    let points = parse_u64_list(rest)?
                        .into_iter()
                        .map(|p| p as usize)
                        .collect::<Vec<_>>();
                    Observable::indicator(sys.size(), &points)
                }
                Some(("coord", rest)) => {
                    let (axis, freq) = rest
                        .split_once(':')
                        .ok_or_else(|| missing_arg(entry, "frequency"))?;
                    let axis: usize = axis
                        .parse()
                        .map_err(|_| format!("bad axis in '{entry}'"))?;
                    let freq = parse_u64(freq)?;
                    let moduli = sys
                        .coord_moduli()
                        .ok_or_else(|| "system has no coordinate structure".to_string())?;
                    if axis >= moduli.len() {
                        return Err(format!(
                            "axis {axis} out of range for {} coordinates",
                            moduli.len()
                        ));
                    }
                    let m = moduli[axis] as f64;
                    Observable::from_fn(sys.size(), 1.0, |x| {
                        let c = sys.coords(x).unwrap()[axis];
                        e(freq as f64 * c as f64 / m)
                    })
                }
                _ => return Err(format!("unknown observable '{entry}'")),
            },
        };
        obs.push(built.map_err(|err| err.to_string())?);
    }
    if obs.len() == 1 && columns > 1 {
        let template = obs[0].clone();
        obs = vec![template; columns];
    }
    if obs.len() != columns {
        return Err(format!(
            "{} observables for {} polynomial columns",
            obs.len(),
            columns
        ));
    }
    Ok(obs)
}

/// Natural default observable: the first coordinate character on the last
/// axis of a coordinate system, or the constant 1.
pub fn default_obs_spec(sys: &FiniteSystem) -> String {
    match sys.coord_moduli() {
        Some(moduli) => format!("coord:{}:1", moduli.len() - 1),
        None => "one".to_string(),
    }
}

/// Membership grammar for the AP-search ground set over `[1, N]`:
/// `all` | `evens` | `set:SPEC` | `list:A+B+C`.
pub fn parse_members(spec: &str, n: u64, table: &FactorTable) -> Result<Vec<bool>, String> {
    let spec = spec.trim();
    match spec {
        "all" => Ok(vec![true; n as usize]),
        "evens" => Ok((1..=n).map(|x| x % 2 == 0).collect()),
        _ => match spec.split_once(':') {
            Some(("set", rest)) => {
                let set = parse_set(rest)?;
                (1..=n)
                    .map(|x| set.indicator(table, x).map_err(|err| err.to_string()))
                    .collect()
            }
            Some(("list", rest)) => {
                let mut members = vec![false; n as usize];
                for item in rest.split('+') {
                    let x = parse_u64(item)?;
                    if x == 0 || x > n {
                        return Err(format!("list member {x} outside [1, {n}]"));
                    }
                    members[(x - 1) as usize] = true;
                }
                Ok(members)
            }
            _ => Err(format!("unknown member spec '{spec}'")),
        },
    }
}

fn missing_arg(spec: &str, what: &str) -> String {
    format!("'{spec}' is missing its {what}")
}
