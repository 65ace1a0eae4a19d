//! Parsers for the native MovieLens 100K and 1M file layouts.
//!
//! 100K: `u.data` (tab separated), `u.user` and `u.item` (pipe separated),
//! optionally `u.occupation` and `u.genre` for the vocabularies.
//! 1M: `ratings.dat`, `users.dat`, `movies.dat`, fields separated by `::`.
//! Both releases are Latin-1 encoded.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{DatasetName, Gender, ItemProfile, Rating, RatingDataset, UserProfile};
use crate::error::{Error, Result};

/// Genre vocabulary of MovieLens 100K, in `u.genre` order.
pub const ML100K_GENRES: [&str; 19] = [
    "unknown",
    "Action",
    "Adventure",
    "Animation",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

/// Genre vocabulary of MovieLens 1M, in README order.
pub const ML1M_GENRES: [&str; 18] = [
    "Action",
    "Adventure",
    "Animation",
    "Children's",
    "Comedy",
    "Crime",
    "Documentary",
    "Drama",
    "Fantasy",
    "Film-Noir",
    "Horror",
    "Musical",
    "Mystery",
    "Romance",
    "Sci-Fi",
    "Thriller",
    "War",
    "Western",
];

/// Occupation labels of MovieLens 1M, indexed by the numeric code in
/// `users.dat`.
pub const ML1M_OCCUPATIONS: [&str; 21] = [
    "other",
    "academic/educator",
    "artist",
    "clerical/admin",
    "college/grad student",
    "customer service",
    "doctor/health care",
    "executive/managerial",
    "farmer",
    "homemaker",
    "K-12 student",
    "lawyer",
    "programmer",
    "retired",
    "sales/marketing",
    "scientist",
    "self-employed",
    "technician/engineer",
    "tradesman/craftsman",
    "unemployed",
    "writer",
];

const ML1M_AGE_CODES: [u32; 7] = [1, 18, 25, 35, 45, 50, 56];
const MONTHS: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

pub fn load_movielens(name: DatasetName, dir: &Path) -> Result<RatingDataset> {
    match name {
        DatasetName::Ml100k => load_100k(dir),
        DatasetName::Ml1m => load_1m(dir),
    }
}

/// One non-empty line of a data file, with enough context to report it.
struct Line<'a> {
    file: &'a Path,
    number: usize,
    text: &'a str,
}

impl Line<'_> {
    fn malformed(&self, reason: impl Into<String>) -> Error {
        Error::Malformed {
            file: self.file.to_path_buf(),
            line: self.number,
            reason: reason.into(),
            raw: self.text.to_string(),
        }
    }

    fn fields(&self, sep: &str, expected: usize) -> Result<Vec<&str>> {
        let fields: Vec<&str> = self.text.split(sep).collect();
        if fields.len() != expected {
            return Err(self.malformed(format!("expected {expected} fields, found {}", fields.len())));
        }
        Ok(fields)
    }

    fn parse<T: FromStr>(&self, field: &str, what: &str) -> Result<T> {
        field
            .trim()
            .parse()
            .map_err(|_| self.malformed(format!("invalid {what} {field:?}")))
    }

    fn rating_value(&self, field: &str) -> Result<u8> {
        let value: u8 = self.parse(field, "rating")?;
        if !(1..=5).contains(&value) {
            return Err(self.malformed(format!("rating {value} outside 1-5")));
        }
        Ok(value)
    }

    fn gender(&self, field: &str) -> Result<Gender> {
        match field.trim() {
            "M" => Ok(Gender::Male),
            "F" => Ok(Gender::Female),
            other => Err(self.malformed(format!("invalid gender {other:?}"))),
        }
    }

    fn year(&self, year: u16) -> Result<u16> {
        if !(1900..=2001).contains(&year) {
            return Err(self.malformed(format!("release year {year} outside 1900-2001")));
        }
        Ok(year)
    }
}

struct TextFile {
    path: PathBuf,
    text: String,
}

impl TextFile {
    fn read(dir: &Path, name: &str) -> Result<Self> {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
        // Latin-1 maps each byte to the code point of the same value.
        let text = bytes.iter().map(|&b| b as char).collect();
        Ok(Self { path, text })
    }

    fn read_optional(dir: &Path, name: &str) -> Result<Option<Self>> {
        if dir.join(name).exists() {
            Self::read(dir, name).map(Some)
        } else {
            Ok(None)
        }
    }

    fn lines(&self) -> impl Iterator<Item = Line<'_>> {
        self.text.split('\n').enumerate().filter_map(|(i, raw)| {
            let text = raw.strip_suffix('\r').unwrap_or(raw);
            (!text.trim().is_empty()).then_some(Line {
                file: &self.path,
                number: i + 1,
                text,
            })
        })
    }
}

fn load_100k(dir: &Path) -> Result<RatingDataset> {
    let genres: Vec<String> = match TextFile::read_optional(dir, "u.genre")? {
        Some(file) => {
            let mut out = Vec::new();
            for line in file.lines() {
                let f = line.fields("|", 2)?;
                let index: usize = line.parse(f[1], "genre index")?;
                if index != out.len() {
                    return Err(line.malformed("genre indices must be consecutive from 0"));
                }
                out.push(f[0].to_string());
            }
            out
        }
        None => ML100K_GENRES.iter().map(|s| s.to_string()).collect(),
    };

    let mut users = BTreeMap::new();
    let file = TextFile::read(dir, "u.user")?;
    for line in file.lines() {
        let f = line.fields("|", 5)?;
        let user_id = line.parse(f[0], "user id")?;
        let profile = UserProfile {
            user_id,
            age: line.parse(f[1], "age")?,
            gender: line.gender(f[2])?,
            occupation: f[3].trim().to_string(),
            zip_code: f[4].trim().to_string(),
        };
        if users.insert(user_id, profile).is_some() {
            return Err(line.malformed("duplicate user id"));
        }
    }

    let occupations: Vec<String> = match TextFile::read_optional(dir, "u.occupation")? {
        Some(file) => file.lines().map(|l| l.text.trim().to_string()).collect(),
        None => {
            let mut v: Vec<String> = users.values().map(|u| u.occupation.clone()).collect();
            v.sort();
            v.dedup();
            v
        }
    };
    for user in users.values() {
        if !occupations.contains(&user.occupation) {
            return Err(Error::OutOfVocabulary {
                field: "occupation",
                value: user.occupation.clone(),
            });
        }
    }

    let mut items = BTreeMap::new();
    let file = TextFile::read(dir, "u.item")?;
    for line in file.lines() {
        let f = line.fields("|", 5 + genres.len())?;
        let item_id = line.parse(f[0], "item id")?;
        let release_year = parse_release_date(&line, f[2])?;
        let mut item_genres = Vec::new();
        for (flag, genre) in f[5..].iter().zip(&genres) {
            match flag.trim() {
                "1" => item_genres.push(genre.clone()),
                "0" => {}
                other => return Err(line.malformed(format!("invalid genre flag {other:?}"))),
            }
        }
        let profile = ItemProfile {
            item_id,
            title: f[1].to_string(),
            release_year,
            genres: item_genres,
        };
        if items.insert(item_id, profile).is_some() {
            return Err(line.malformed("duplicate item id"));
        }
    }

    let mut ratings = Vec::new();
    let file = TextFile::read(dir, "u.data")?;
    for line in file.lines() {
        let f = line.fields("\t", 4)?;
        ratings.push(Rating {
            user: line.parse(f[0], "user id")?,
            item: line.parse(f[1], "item id")?,
            value: line.rating_value(f[2])?,
            timestamp: line.parse(f[3], "timestamp")?,
        });
    }

    RatingDataset::new(DatasetName::Ml100k, ratings, users, items, occupations, genres)
}

/// `DD-MMM-YYYY`, or empty for the handful of undated items.
fn parse_release_date(line: &Line<'_>, field: &str) -> Result<Option<u16>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    let parts: Vec<&str> = field.split('-').collect();
    if parts.len() != 3 || !MONTHS.contains(&parts[1]) {
        return Err(line.malformed(format!("invalid release date {field:?}")));
    }
    let _day: u8 = line.parse(parts[0], "release day")?;
    let year = line.parse(parts[2], "release year")?;
    line.year(year).map(Some)
}

fn load_1m(dir: &Path) -> Result<RatingDataset> {
    let mut users = BTreeMap::new();
    let file = TextFile::read(dir, "users.dat")?;
    for line in file.lines() {
        let f = line.fields("::", 5)?;
        let user_id = line.parse(f[0], "user id")?;
        let age: u32 = line.parse(f[2], "age code")?;
        if !ML1M_AGE_CODES.contains(&age) {
            return Err(line.malformed(format!("unknown age code {age}")));
        }
        let code: usize = line.parse(f[3], "occupation code")?;
        let occupation = ML1M_OCCUPATIONS
            .get(code)
            .ok_or_else(|| line.malformed(format!("unknown occupation code {code}")))?;
        let profile = UserProfile {
            user_id,
            age,
            gender: line.gender(f[1])?,
            occupation: occupation.to_string(),
            zip_code: f[4].trim().to_string(),
        };
        if users.insert(user_id, profile).is_some() {
            return Err(line.malformed("duplicate user id"));
        }
    }

    let mut items = BTreeMap::new();
    let file = TextFile::read(dir, "movies.dat")?;
    for line in file.lines() {
        let (id, rest) = line
            .text
            .split_once("::")
            .ok_or_else(|| line.malformed("expected 3 fields"))?;
        let (title, genre_field) = rest
            .rsplit_once("::")
            .ok_or_else(|| line.malformed("expected 3 fields"))?;
        let item_id = line.parse(id, "item id")?;
        let release_year = match title_year(title) {
            Some(year) => Some(line.year(year)?),
            None => None,
        };
        let mut genres = Vec::new();
        for g in genre_field.split('|').map(str::trim).filter(|g| !g.is_empty()) {
            if !ML1M_GENRES.contains(&g) {
                return Err(line.malformed(format!("unknown genre {g:?}")));
            }
            genres.push(g.to_string());
        }
        let profile = ItemProfile {
            item_id,
            title: title.to_string(),
            release_year,
            genres,
        };
        if items.insert(item_id, profile).is_some() {
            return Err(line.malformed("duplicate item id"));
        }
    }

    let mut ratings = Vec::new();
    let file = TextFile::read(dir, "ratings.dat")?;
    for line in file.lines() {
        let f = line.fields("::", 4)?;
        ratings.push(Rating {
            user: line.parse(f[0], "user id")?,
            item: line.parse(f[1], "item id")?,
            value: line.rating_value(f[2])?,
            timestamp: line.parse(f[3], "timestamp")?,
        });
    }

    RatingDataset::new(
        DatasetName::Ml1m,
        ratings,
        users,
        items,
        ML1M_OCCUPATIONS.iter().map(|s| s.to_string()).collect(),
        ML1M_GENRES.iter().map(|s| s.to_string()).collect(),
    )
}

/// Year from a trailing `(YYYY)` in a 1M title.
fn title_year(title: &str) -> Option<u16> {
    let t = title.trim_end();
    let inner = t.strip_suffix(')')?;
    let open = inner.rfind('(')?;
    let year = &inner[open + 1..];
    (year.len() == 4).then(|| year.parse().ok()).flatten()
}
