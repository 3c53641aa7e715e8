//! Case files shipped with the crate.

use crate::network::{parse_case, NetworkCase};

pub const MICRO3: &str = include_str!("../cases/micro3.json");
pub const CASE9: &str = include_str!("../cases/case9.json");
pub const NEGLMP: &str = include_str!("../cases/neglmp.json");

/// `(name, document)` for every bundled case.
pub const ALL: [(&str, &str); 3] = [("micro3", MICRO3), ("case9", CASE9), ("neglmp", NEGLMP)];

/// Parses a bundled case by name.
pub fn case(name: &str) -> Option<NetworkCase> {
    ALL.iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_case(text).expect("bundled cases are valid"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_cases_parse_and_validate() {
        for (name, _) in ALL {
            let c = case(name).unwrap();
            assert!(crate::network::validate(&c).is_empty(), "{name}");
        }
        assert_eq!(case("micro3").unwrap().periods(), 4);
        let c9 = case("case9").unwrap();
        assert_eq!((c9.buses.len(), c9.storages.len(), c9.periods()), (9, 2, 6));
    }
}
