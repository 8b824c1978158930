//! Seeded synthetic knowledge bases in the TSV triple format.

use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};

const COUNTRIES: [&str; 8] = ["USA", "France", "Germany", "Japan", "Brazil", "India", "Canada", "Italy"];

struct Emitter {
    text: String,
}

impl Emitter {
    fn entity(&mut self, s: &str, p: &str, o: &str) {
        writeln!(self.text, "{s}\t{p}\t{o}\tentity").unwrap();
    }

    fn literal(&mut self, s: &str, p: &str, o: impl std::fmt::Display) {
        writeln!(self.text, "{s}\t{p}\t{o}\tliteral").unwrap();
    }
}

fn cities(out: &mut Emitter, n: usize, rng: &mut ChaCha8Rng) {
    let population = LogNormal::<f64>::new(11.5, 1.4).unwrap();
    let density = LogNormal::<f64>::new(7.0, 0.6).unwrap();
    for i in 0..n {
        let id = format!("City_{i:04}");
        out.entity(&id, "type", "City");
        let pop = population.sample(rng).round().max(100.0);
        out.literal(&id, "population", pop as u64);
        let area = (pop / density.sample(rng)).max(0.5);
        out.literal(&id, "areaLand", format!("{area:.1}"));
        out.literal(&id, "elevation", rng.random_range(0..2500));
        out.literal(&id, "foundingYear", rng.random_range(800..2000));
        out.entity(&id, "country", COUNTRIES[rng.random_range(0..COUNTRIES.len())]);
    }
}

/// `n` cities with log-normal populations plus area, elevation, founding
/// year and country.
pub fn city_kb(n: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Emitter { text: String::new() };
    cities(&mut out, n, &mut rng);
    out.text
}

/// Multi-type sample KB: cities, films, animals, politicians with a
/// President subclass, buildings and athletes.
pub fn sample_kb(seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Emitter { text: String::new() };
    out.entity("President", "subclassOf", "Politician");
    cities(&mut out, 500, &mut rng);

    let gross = LogNormal::<f64>::new(17.0, 1.2).unwrap();
    for i in 0..300 {
        let id = format!("Film_{i:03}");
        out.entity(&id, "type", "Film");
        out.literal(&id, "runtime", rng.random_range(70..200));
        out.literal(&id, "gross", gross.sample(&mut rng).round() as u64);
        out.literal(&id, "releaseYear", rng.random_range(1930..2024));
        out.literal(&id, "rating", format!("{:.1}", rng.random_range(1.0..10.0f64)));
    }

    let mass = LogNormal::<f64>::new(2.0, 2.5).unwrap();
    for i in 0..250 {
        let id = format!("Animal_{i:03}");
        out.entity(&id, "type", "Animal");
        let m = mass.sample(&mut rng);
        out.literal(&id, "mass", format!("{m:.2}"));
        out.literal(&id, "length", format!("{:.2}", m.cbrt() * 0.3));
        out.literal(&id, "lifespan", rng.random_range(1..120));
        out.literal(&id, "topSpeed", rng.random_range(1..110));
    }

    let age = Normal::<f64>::new(58.0, 11.0).unwrap();
    for i in 0..250 {
        let id = format!("Politician_{i:03}");
        let class = if i % 10 == 0 { "President" } else { "Politician" };
        out.entity(&id, "type", class);
        let a: f64 = age.sample(&mut rng);
        out.literal(&id, "age", a.clamp(30.0, 95.0).round() as u64);
        out.literal(&id, "yearsInOffice", rng.random_range(0..40));
        out.entity(&id, "birthPlace", &format!("City_{:04}", rng.random_range(0..500)));
    }

    for i in 0..250 {
        let id = format!("Building_{i:03}");
        out.entity(&id, "type", "Building");
        let floors = rng.random_range(1..120u32);
        out.literal(&id, "floorCount", floors);
        out.literal(&id, "height", format!("{:.1}", floors as f64 * rng.random_range(3.0..4.5)));
        out.literal(&id, "completionYear", rng.random_range(1200..2024));
        out.entity(&id, "location", &format!("City_{:04}", rng.random_range(0..500)));
    }

    for i in 0..250 {
        let id = format!("Athlete_{i:03}");
        out.entity(&id, "type", "Athlete");
        out.literal(&id, "height", rng.random_range(150..220));
        out.literal(&id, "weight", rng.random_range(45..140));
        out.literal(&id, "age", rng.random_range(16..45));
        out.literal(&id, "medals", rng.random_range(0..30));
    }
    out.text
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::KnowledgeBase;

    #[test]
    fn generators_load_and_are_deterministic() {
        assert_eq!(city_kb(20, 1), city_kb(20, 1));
        let kb = KnowledgeBase::parse(&city_kb(50, 2), "t").unwrap();
        assert_eq!(kb.instances_of("City", true).unwrap().len(), 50);
        let kb = KnowledgeBase::parse(&sample_kb(3), "t").unwrap();
        assert_eq!(kb.instances_of("Politician", true).unwrap().len(), 250);
        assert_eq!(kb.instances_of("President", true).unwrap().len(), 25);
        assert_eq!(kb.instances_of("City", true).unwrap().len(), 500);
    }
}
