//! Text form of event descriptions.
//!
//! Every [`EventSpec`] prints to a single canonical line and parses back from
//! it (`Display` / `FromStr`). The grammar, one form per kind:
//!
//! ```text
//! crossing <h|v> <plus|minus*> rect=<x0>..<x1>x<y0>..<y1>
//! circuit <plus|minus*> annulus=<r>..<R>
//! one-arm <plus|minus*> n=<r>
//! arms k1=<count> k2=<count> annulus=<r>..<R> [half-plane]
//! boundary-arm <two|two*|three|three*> n=<r>
//! pivotal site=<x>,<y> <event...>
//! four-arm site=<x>,<y> n=<r>
//! spin site=<x>,<y> <plus|minus>
//! ```
//!
//! Tokens are whitespace-separated; fields are positional. Parse errors carry
//! 1-based byte columns so configuration files can point at the offending
//! character.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{ArmSpec, BoundaryArmKind, EventSpec, Orientation};
use crate::clusters::Color;
use crate::gibbs::Spin;
use crate::lattice::{Annulus, Coord, Rect, Site};

/// Why an event description failed to parse.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum EventParseError {
    #[error("empty event description")]
    Empty,
    #[error("unknown event kind `{found}` at column {column}")]
    UnknownKind { column: usize, found: String },
    #[error("expected {expected} at column {column}, found `{found}`")]
    Unexpected {
        column: usize,
        expected: &'static str,
        found: String,
    },
    #[error("`{kind}` is missing its `{field}` field")]
    MissingField {
        kind: &'static str,
        field: &'static str,
    },
    #[error("cannot read a number from `{text}` at column {column}")]
    Number { column: usize, text: String },
    #[error("{0}")]
    Invalid(String),
}

/// A whitespace-delimited token with its 1-based byte column.
#[derive(Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    column: usize,
}

fn tokenize(s: &str) -> Vec<Tok<'_>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        if c.is_whitespace() {
            if let Some(b) = start.take() {
                out.push(Tok {
                    text: &s[b..i],
                    column: b + 1,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(b) = start {
        out.push(Tok {
            text: &s[b..],
            column: b + 1,
        });
    }
    out
}

struct Cursor<'a> {
    toks: Vec<Tok<'a>>,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<Tok<'a>> {
        self.toks.get(self.pos).copied()
    }

    fn advance(&mut self) -> Option<Tok<'a>> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    /// Next token, or a missing-field error naming what it would have been.
    fn field_token(
        &mut self,
        kind: &'static str,
        field: &'static str,
    ) -> Result<Tok<'a>, EventParseError> {
        self.advance()
            .ok_or(EventParseError::MissingField { kind, field })
    }

    /// A `name=value` token; returns the value text and its column.
    fn key_value(
        &mut self,
        kind: &'static str,
        field: &'static str,
        expected: &'static str,
    ) -> Result<(&'a str, usize), EventParseError> {
        let tok = self.field_token(kind, field)?;
        let unexpected = || EventParseError::Unexpected {
            column: tok.column,
            expected,
            found: tok.text.to_owned(),
        };
        let rest = tok.text.strip_prefix(field).ok_or_else(unexpected)?;
        let value = rest.strip_prefix('=').ok_or_else(unexpected)?;
        Ok((value, tok.column + field.len() + 1))
    }
}

fn number(text: &str, column: usize) -> Result<Coord, EventParseError> {
    text.parse().map_err(|_| EventParseError::Number {
        column,
        text: text.to_owned(),
    })
}

fn count(text: &str, column: usize) -> Result<u32, EventParseError> {
    text.parse().map_err(|_| EventParseError::Number {
        column,
        text: text.to_owned(),
    })
}

/// `<lo>..<hi>` at `column`.
fn range(text: &str, column: usize) -> Result<(Coord, Coord), EventParseError> {
    let Some((lo, hi)) = text.split_once("..") else {
        return Err(EventParseError::Unexpected {
            column,
            expected: "<lo>..<hi>",
            found: text.to_owned(),
        });
    };
    Ok((number(lo, column)?, number(hi, column + lo.len() + 2)?))
}

/// `<x>,<y>` at `column`.
fn site(text: &str, column: usize) -> Result<Site, EventParseError> {
    let Some((x, y)) = text.split_once(',') else {
        return Err(EventParseError::Unexpected {
            column,
            expected: "<x>,<y>",
            found: text.to_owned(),
        });
    };
    Ok(Site::new(
        number(x, column)?,
        number(y, column + x.len() + 1)?,
    ))
}

fn color(tok: Tok<'_>) -> Result<Color, EventParseError> {
    match tok.text {
        "plus" => Ok(Color::Plus),
        "minus*" => Ok(Color::MinusStar),
        _ => Err(EventParseError::Unexpected {
            column: tok.column,
            expected: "`plus` or `minus*`",
            found: tok.text.to_owned(),
        }),
    }
}

fn invalid(err: impl fmt::Display) -> EventParseError {
    EventParseError::Invalid(err.to_string())
}

fn rect_field(cur: &mut Cursor<'_>, kind: &'static str) -> Result<Rect, EventParseError> {
    let (value, column) = cur.key_value(kind, "rect", "rect=<x0>..<x1>x<y0>..<y1>")?;
    let Some((xs, ys)) = value.split_once('x') else {
        return Err(EventParseError::Unexpected {
            column,
            expected: "<x0>..<x1>x<y0>..<y1>",
            found: value.to_owned(),
        });
    };
    let (x0, x1) = range(xs, column)?;
    let (y0, y1) = range(ys, column + xs.len() + 1)?;
    Rect::new(x0, x1, y0, y1).map_err(invalid)
}

fn annulus_field(cur: &mut Cursor<'_>, kind: &'static str) -> Result<Annulus, EventParseError> {
    let (value, column) = cur.key_value(kind, "annulus", "annulus=<r>..<R>")?;
    let (inner, outer) = range(value, column)?;
    Annulus::new(inner, outer).map_err(invalid)
}

fn radius_field(cur: &mut Cursor<'_>, kind: &'static str) -> Result<Coord, EventParseError> {
    let (value, column) = cur.key_value(kind, "n", "n=<radius>")?;
    number(value, column)
}

fn site_field(cur: &mut Cursor<'_>, kind: &'static str) -> Result<Site, EventParseError> {
    let (value, column) = cur.key_value(kind, "site", "site=<x>,<y>")?;
    site(value, column)
}

fn parse_spec(cur: &mut Cursor<'_>) -> Result<EventSpec, EventParseError> {
    let head = cur.advance().ok_or(EventParseError::Empty)?;
    match head.text {
        "crossing" => {
            let tok = cur.field_token("crossing", "orientation")?;
            let orientation = match tok.text {
                "h" => Orientation::Horizontal,
                "v" => Orientation::Vertical,
                _ => {
                    return Err(EventParseError::Unexpected {
                        column: tok.column,
                        expected: "`h` or `v`",
                        found: tok.text.to_owned(),
                    })
                }
            };
            let color = color(cur.field_token("crossing", "color")?)?;
            let rect = rect_field(cur, "crossing")?;
            Ok(EventSpec::Crossing {
                rect,
                orientation,
                color,
            })
        }
        "circuit" => {
            let color = color(cur.field_token("circuit", "color")?)?;
            let annulus = annulus_field(cur, "circuit")?;
            Ok(EventSpec::Circuit { annulus, color })
        }
        "one-arm" => {
            let color = color(cur.field_token("one-arm", "color")?)?;
            let radius = radius_field(cur, "one-arm")?;
            Ok(EventSpec::OneArm { radius, color })
        }
        "arms" => {
            let (k1, c1) = cur.key_value("arms", "k1", "k1=<count>")?;
            let plus_arms = count(k1, c1)?;
            let (k2, c2) = cur.key_value("arms", "k2", "k2=<count>")?;
            let minus_arms = count(k2, c2)?;
            let annulus = annulus_field(cur, "arms")?;
            let half_plane = match cur.peek() {
                Some(tok) if tok.text == "half-plane" => {
                    cur.advance();
                    true
                }
                _ => false,
            };
            Ok(EventSpec::Arms(ArmSpec {
                plus_arms,
                minus_arms,
                annulus,
                half_plane,
            }))
        }
        "boundary-arm" => {
            let tok = cur.field_token("boundary-arm", "kind")?;
            let kind = match tok.text {
                "two" => BoundaryArmKind::TwoArm,
                "two*" => BoundaryArmKind::TwoArmStarred,
                "three" => BoundaryArmKind::ThreeArm,
                "three*" => BoundaryArmKind::ThreeArmStarred,
                _ => {
                    return Err(EventParseError::Unexpected {
                        column: tok.column,
                        expected: "`two`, `two*`, `three` or `three*`",
                        found: tok.text.to_owned(),
                    })
                }
            };
            let radius = radius_field(cur, "boundary-arm")?;
            Ok(EventSpec::HalfPlaneBoundary { radius, kind })
        }
        "pivotal" => {
            let site = site_field(cur, "pivotal")?;
            if cur.peek().is_none() {
                return Err(EventParseError::MissingField {
                    kind: "pivotal",
                    field: "event",
                });
            }
            let inner = parse_spec(cur)?;
            Ok(EventSpec::Pivotal {
                site,
                inner: Box::new(inner),
            })
        }
        "four-arm" => {
            let site = site_field(cur, "four-arm")?;
            let radius = radius_field(cur, "four-arm")?;
            Ok(EventSpec::FourArm { site, radius })
        }
        "spin" => {
            let site = site_field(cur, "spin")?;
            let tok = cur.field_token("spin", "value")?;
            let value = match tok.text {
                "plus" => Spin::Plus,
                "minus" => Spin::Minus,
                _ => {
                    return Err(EventParseError::Unexpected {
                        column: tok.column,
                        expected: "`plus` or `minus`",
                        found: tok.text.to_owned(),
                    })
                }
            };
            Ok(EventSpec::SpinIs { site, value })
        }
        _ => Err(EventParseError::UnknownKind {
            column: head.column,
            found: head.text.to_owned(),
        }),
    }
}

impl FromStr for EventSpec {
    type Err = EventParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut cur = Cursor {
            toks: tokenize(s),
            pos: 0,
        };
        let spec = parse_spec(&mut cur)?;
        if let Some(tok) = cur.peek() {
            return Err(EventParseError::Unexpected {
                column: tok.column,
                expected: "end of description",
                found: tok.text.to_owned(),
            });
        }
        spec.validate().map_err(invalid)?;
        Ok(spec)
    }
}

impl fmt::Display for Orientation {
    /// The grammar token: `h` or `v`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Orientation::Horizontal => "h",
            Orientation::Vertical => "v",
        })
    }
}

impl fmt::Display for BoundaryArmKind {
    /// The grammar token: `two`, `two*`, `three` or `three*`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryArmKind::TwoArm => "two",
            BoundaryArmKind::TwoArmStarred => "two*",
            BoundaryArmKind::ThreeArm => "three",
            BoundaryArmKind::ThreeArmStarred => "three*",
        })
    }
}

impl fmt::Display for EventSpec {
    /// The canonical line the grammar above accepts.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventSpec::Crossing {
                rect,
                orientation,
                color,
            } => write!(
                f,
                "crossing {orientation} {color} rect={}..{}x{}..{}",
                rect.x0(),
                rect.x1(),
                rect.y0(),
                rect.y1()
            ),
            EventSpec::Circuit { annulus, color } => write!(
                f,
                "circuit {color} annulus={}..{}",
                annulus.inner(),
                annulus.outer()
            ),
            EventSpec::OneArm { radius, color } => write!(f, "one-arm {color} n={radius}"),
            EventSpec::Arms(spec) => {
                write!(
                    f,
                    "arms k1={} k2={} annulus={}..{}",
                    spec.plus_arms,
                    spec.minus_arms,
                    spec.annulus.inner(),
                    spec.annulus.outer()
                )?;
                if spec.half_plane {
                    f.write_str(" half-plane")?;
                }
                Ok(())
            }
            EventSpec::HalfPlaneBoundary { radius, kind } => {
                write!(f, "boundary-arm {kind} n={radius}")
            }
            EventSpec::Pivotal { site, inner } => {
                write!(f, "pivotal site={},{} {inner}", site.x, site.y)
            }
            EventSpec::FourArm { site, radius } => {
                write!(f, "four-arm site={},{} n={radius}", site.x, site.y)
            }
            EventSpec::SpinIs { site, value } => {
                write!(f, "spin site={},{} {value}", site.x, site.y)
            }
        }
    }
}
