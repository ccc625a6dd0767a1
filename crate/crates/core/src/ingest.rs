//! MovieLens-100k loader and featurizer.
//!
//! Reads the raw distribution files (`u.data`, `u*.base`, `u*.test`,
//! `u.user`, `u.item`, `u.occupation`), binarizes ratings at `> 2`, and
//! turns side information into feature vectors: users as (normalized age,
//! sex, occupation index / number of occupations), items as 19 genre flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand::Rng;

use crate::error::{Error, Result};
use crate::synthgen::balance_test_split;
use crate::types::{Interaction, SequentialDataset};

pub const N_GENRES: usize = 19;

pub const SPLITS: [&str; 7] = ["u1", "u2", "u3", "u4", "u5", "ua", "ub"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawRating {
    pub user: u32,
    pub item: u32,
    pub rating: u8,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sex {
    Male,
    Female,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserProfile {
    pub id: u32,
    pub age: u32,
    pub sex: Sex,
    pub occupation: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ItemProfile {
    pub id: u32,
    pub genres: Vec<bool>,
}

/// Parsed profiles plus the full rating log.
#[derive(Debug, Clone)]
pub struct Ml100k {
    pub dir: PathBuf,
    pub ratings: Vec<RawRating>,
    pub users: BTreeMap<u32, UserProfile>,
    pub items: BTreeMap<u32, ItemProfile>,
    pub occupations: Vec<String>,
}

fn read_lossy(path: &Path) -> Result<String> {
    // u.item is Latin-1; only ids and flags are used, so lossy decoding is fine.
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, raw: &str, what: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::parse(path, line, format!("bad {what} {raw:?}")))
}

/// Parses a tab-separated rating file: `user item rating timestamp`.
pub fn parse_ratings(path: &Path) -> Result<Vec<RawRating>> {
    let text = read_lossy(path)?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse_rating_line(path, n + 1, line)?);
    }
    Ok(out)
}

pub fn parse_rating_line(path: &Path, line_no: usize, line: &str) -> Result<RawRating> {
    let f: Vec<&str> = line.split('\t').collect();
    if f.len() != 4 {
        return Err(Error::parse(path, line_no, format!("expected 4 tab-separated fields, found {}", f.len())));
    }
    let rating: u8 = field(path, line_no, f[2], "rating")?;
    if !(1..=5).contains(&rating) {
        return Err(Error::parse(path, line_no, format!("rating {rating} outside 1..=5")));
    }
    Ok(RawRating {
        user: field(path, line_no, f[0], "user id")?,
        item: field(path, line_no, f[1], "item id")?,
        rating,
        timestamp: field(path, line_no, f[3], "timestamp")?,
    })
}

/// Occupation names in file order; the index is the encoded value.
pub fn parse_occupations(path: &Path) -> Result<Vec<String>> {
    Ok(read_lossy(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// Parses `u.user` (`id|age|gender|occupation|zip`). Occupations not yet in
/// `occupations` are appended.
pub fn parse_users(path: &Path, occupations: &mut Vec<String>) -> Result<BTreeMap<u32, UserProfile>> {
    let text = read_lossy(path)?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = n + 1;
        let f: Vec<&str> = line.split('|').collect();
        if f.len() != 5 {
            return Err(Error::parse(path, line_no, format!("expected 5 fields, found {}", f.len())));
        }
        let sex = match f[2] {
            "M" => Sex::Male,
            "F" => Sex::Female,
            other => return Err(Error::parse(path, line_no, format!("bad gender {other:?}"))),
        };
        let occupation = match occupations.iter().position(|o| o == f[3]) {
            Some(i) => i,
            None => {
                occupations.push(f[3].to_string());
                occupations.len() - 1
            }
        };
        let id = field(path, line_no, f[0], "user id")?;
        out.insert(
            id,
            UserProfile {
                id,
                age: field(path, line_no, f[1], "age")?,
                sex,
                occupation,
            },
        );
    }
    Ok(out)
}

/// Parses `u.item`; the last 19 pipe-separated fields are the genre flags.
pub fn parse_items(path: &Path) -> Result<BTreeMap<u32, ItemProfile>> {
    let text = read_lossy(path)?;
    let mut out = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = n + 1;
        let f: Vec<&str> = line.split('|').collect();
        if f.len() < N_GENRES + 1 {
            return Err(Error::parse(path, line_no, format!("expected at least {} fields, found {}", N_GENRES + 1, f.len())));
        }
        let genres = f[f.len() - N_GENRES..]
            .iter()
            .map(|g| match g.trim() {
                "0" => Ok(false),
                "1" => Ok(true),
                other => Err(Error::parse(path, line_no, format!("bad genre flag {other:?}"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        let id = field(path, line_no, f[0], "item id")?;
        out.insert(id, ItemProfile { id, genres });
    }
    Ok(out)
}

impl Ml100k {
    /// Loads profiles and `u.data` from an extracted `ml-100k` directory.
    pub fn load(dir: &Path) -> Result<Self> {
        let occ_path = dir.join("u.occupation");
        let mut occupations = if occ_path.exists() {
            parse_occupations(&occ_path)?
        } else {
            Vec::new()
        };
        let users = parse_users(&dir.join("u.user"), &mut occupations)?;
        let items = parse_items(&dir.join("u.item"))?;
        let data_path = dir.join("u.data");
        let mut me = Self {
            dir: dir.to_path_buf(),
            ratings: Vec::new(),
            users,
            items,
            occupations,
        };
        me.ratings = me.load_ratings(&data_path)?;
        Ok(me)
    }

    /// Parses a rating file and checks every id against the profiles.
    pub fn load_ratings(&self, path: &Path) -> Result<Vec<RawRating>> {
        let ratings = parse_ratings(path)?;
        for (n, r) in ratings.iter().enumerate() {
            if !self.users.contains_key(&r.user) {
                return Err(Error::parse(path, n + 1, format!("unknown user id {}", r.user)));
            }
            if !self.items.contains_key(&r.item) {
                return Err(Error::parse(path, n + 1, format!("unknown item id {}", r.item)));
            }
        }
        Ok(ratings)
    }

    /// Ratings of a prespecified test split such as `u1` or `ua`.
    pub fn split_test(&self, split: &str) -> Result<Vec<RawRating>> {
        if !SPLITS.contains(&split) {
            return Err(Error::InvalidArgument(format!("unknown split {split:?}; expected one of {SPLITS:?}")));
        }
        self.load_ratings(&self.dir.join(format!("{split}.test")))
    }

    pub fn featurizer(&self, one_hot_occupation: bool) -> Featurizer {
        Featurizer::new(self.users.values(), self.occupations.len(), one_hot_occupation)
    }

    /// Every item's feature vector, in id order.
    pub fn catalog(&self, f: &Featurizer) -> Vec<Vec<f64>> {
        self.items.values().map(|i| f.item(i)).collect()
    }
}

/// `true` for ratings above 2.
pub fn binarize(r: &RawRating) -> bool {
    r.rating > 2
}

#[derive(Debug, Clone, PartialEq)]
pub struct Featurizer {
    age_min: u32,
    age_max: u32,
    n_occupations: usize,
    one_hot: bool,
}

impl Featurizer {
    pub fn new<'a, I>(users: I, n_occupations: usize, one_hot: bool) -> Self
    where
        I: IntoIterator<Item = &'a UserProfile>,
    {
        let (lo, hi) = users
            .into_iter()
            .fold((u32::MAX, 0), |(lo, hi), u| (lo.min(u.age), hi.max(u.age)));
        Self {
            age_min: lo.min(hi),
            age_max: hi,
            n_occupations: n_occupations.max(1),
            one_hot,
        }
    }

    pub fn user(&self, u: &UserProfile) -> Vec<f64> {
        let span = self.age_max.saturating_sub(self.age_min);
        let age = if span == 0 {
            0.0
        } else {
            (u.age.saturating_sub(self.age_min)) as f64 / span as f64
        };
        let sex = match u.sex {
            Sex::Male => 0.0,
            Sex::Female => 1.0,
        };
        let mut v = vec![age, sex];
        if self.one_hot {
            v.extend((0..self.n_occupations).map(|o| (o == u.occupation) as u8 as f64));
        } else {
            v.push(u.occupation as f64 / self.n_occupations as f64);
        }
        v
    }

    pub fn item(&self, i: &ItemProfile) -> Vec<f64> {
        i.genres.iter().map(|&g| g as u8 as f64).collect()
    }

    pub fn featurize(&self, u: &UserProfile, i: &ItemProfile) -> (Vec<f64>, Vec<f64>) {
        (self.user(u), self.item(i))
    }
}

/// Orders test ratings by timestamp (file order breaks ties), labels and
/// featurizes them, then downsamples to a balanced `n_test`.
pub fn build_test<R: Rng + ?Sized>(
    data: &Ml100k,
    featurizer: &Featurizer,
    ratings: &[RawRating],
    n_test: usize,
    rng: &mut R,
) -> Result<SequentialDataset> {
    let mut ordered: Vec<&RawRating> = ratings.iter().collect();
    ordered.sort_by_key(|r| r.timestamp);
    let xs = ordered
        .into_iter()
        .enumerate()
        .map(|(n, r)| {
            let (user, item) = featurizer.featurize(&data.users[&r.user], &data.items[&r.item]);
            Interaction {
                user,
                item,
                time: n as u64 + 1,
                label: binarize(r),
            }
        })
        .collect();
    balance_test_split(SequentialDataset::all_test(xs)?, n_test, rng)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rating_line() {
        let r = parse_rating_line(Path::new("u.data"), 1, "196\t242\t3\t881250949").unwrap();
        assert_eq!(
            r,
            RawRating {
                user: 196,
                item: 242,
                rating: 3,
                timestamp: 881250949
            }
        );
        let err = parse_rating_line(Path::new("u.data"), 7, "1\t2\t6\t0").unwrap_err();
        assert!(err.to_string().contains("u.data:7"), "{err}");
        assert!(parse_rating_line(Path::new("u.data"), 1, "1 2 3 4").is_err());
    }

    #[test]
    fn binarize_threshold() {
        let r = |rating| RawRating {
            user: 1,
            item: 1,
            rating,
            timestamp: 0,
        };
        assert!(binarize(&r(3)));
        assert!(!binarize(&r(2)));
        assert!(binarize(&r(5)));
        assert!(!binarize(&r(1)));
    }

    #[test]
    fn featurize_extremes() {
        let users = [
            UserProfile { id: 1, age: 10, sex: Sex::Male, occupation: 0 },
            UserProfile { id: 2, age: 30, sex: Sex::Female, occupation: 3 },
            UserProfile { id: 3, age: 60, sex: Sex::Male, occupation: 1 },
        ];
        let f = Featurizer::new(users.iter(), 4, false);
        assert_eq!(f.user(&users[0]), vec![0.0, 0.0, 0.0]);
        // (30 - 10) / (60 - 10) = 0.4, occupation 3 of 4.
        assert_eq!(f.user(&users[1]), vec![0.4, 1.0, 0.75]);
        assert_eq!(f.user(&users[2]), vec![1.0, 0.0, 0.25]);
        let item = ItemProfile { id: 1, genres: vec![false; N_GENRES] };
        assert_eq!(f.item(&item), vec![0.0; N_GENRES]);
        let oh = Featurizer::new(users.iter(), 4, true);
        assert_eq!(oh.user(&users[1]), vec![0.4, 1.0, 0.0, 0.0, 0.0, 1.0]);
    }
}
