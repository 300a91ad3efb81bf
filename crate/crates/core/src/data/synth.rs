//! Seeded synthetic games: random stat tables plus a summary from a fixed
//! grammar. Players are introduced by full name and referred to by surname
//! afterwards. Which players and stats get verbalised depends only on the
//! table (top scorers, stats above a per-type threshold), so content
//! selection is learnable from the records.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::lexicon::{lexicon, ordinal};
use super::schema::{Dataset, GameInstance, Record, RecordSchema, AWAY, HOME, NO_VALUE};
use crate::error::{Error, Result};

const FIRST_NAMES: [&str; 20] = [
    "Aaron", "Ben", "Carl", "Dion", "Eli", "Frank", "Gabe", "Hal", "Ivan", "Jalen", "Kyle", "Luis",
    "Marc", "Nate", "Omar", "Paul", "Quinn", "Ray", "Sam", "Trey",
];
const LAST_NAMES: [&str; 30] = [
    "Adams",
    "Baker",
    "Carter",
    "Dawson",
    "Ellis",
    "Foster",
    "Grant",
    "Hayes",
    "Irving",
    "Jensen",
    "Keller",
    "Lopez",
    "Mullins",
    "Nolan",
    "O'Hearn",
    "Parker",
    "Quarles",
    "Reed",
    "Santos",
    "Tate",
    "Underwood",
    "Vance",
    "Walsh",
    "Young",
    "Zimmer",
    "Burke",
    "Cole",
    "Duffy",
    "Fisher",
    "Gomez",
];
const BASKETBALL_TEAMS: [&str; 12] = [
    "Hawks", "Bulls", "Celtics", "Nets", "Hornets", "Pistons", "Pacers", "Heat", "Bucks", "Knicks",
    "Magic", "Suns",
];
const BASEBALL_TEAMS: [&str; 12] = [
    "Orioles", "Royals", "Tigers", "Twins", "Astros", "Angels", "Rangers", "Mariners", "Yankees",
    "Rays", "Padres", "Giants",
];

/// Basketball stat types with value range and mention threshold.
const BASKETBALL_STATS: [(&str, u32, u32, u32); 8] = [
    ("PTS", 2, 32, 0),
    ("REB", 1, 14, 8),
    ("AST", 0, 11, 6),
    ("STL", 0, 4, 3),
    ("BLK", 0, 4, 3),
    ("TOV", 0, 6, 5),
    ("MIN", 12, 40, 36),
    ("PF", 0, 5, 5),
];
const BATTER_STATS: [(&str, u32, u32); 6] = [
    ("H", 0, 4),
    ("R", 0, 3),
    ("RBI", 0, 4),
    ("BB", 0, 2),
    ("K", 0, 3),
    ("HR", 0, 2),
];
const EVENTS: [&str; 5] = [
    "home-run-batter",
    "single-batter",
    "double-batter",
    "triple-batter",
    "walk-batter",
];
const MAX_PLAYER_MENTIONS: usize = 4;
const NAME_TYPES: [&str; 2] = ["FIRST_NAME", "SECOND_NAME"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SynthConfig {
    pub schema: RecordSchema,
    pub seed: u64,
    pub n_games: usize,
    /// Entities per game, including the two teams.
    pub n_entities: usize,
    /// Stat types per player (batting types for the baseball layout).
    pub n_types: usize,
}

/// Basketball-layout games, all in the training split.
pub fn synth_games(
    seed: u64,
    n_games: usize,
    n_entities: usize,
    n_types: usize,
) -> Result<Dataset> {
    synth_dataset(&SynthConfig {
        schema: RecordSchema::Rw4,
        seed,
        n_games,
        n_entities,
        n_types,
    })
}

pub fn synth_dataset(cfg: &SynthConfig) -> Result<Dataset> {
    let max_types = match cfg.schema {
        RecordSchema::Rw4 => BASKETBALL_STATS.len(),
        RecordSchema::Mlb6 => BATTER_STATS.len(),
    };
    if cfg.n_entities < 2 || cfg.n_entities > LAST_NAMES.len() + 2 {
        return Err(Error::Usage(format!(
            "n_entities must be in 2..={}, got {}",
            LAST_NAMES.len() + 2,
            cfg.n_entities
        )));
    }
    if cfg.n_types < 2 || cfg.n_types > max_types {
        return Err(Error::Usage(format!(
            "n_types must be in 2..={max_types}, got {}",
            cfg.n_types
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dataset = Dataset::new(cfg.schema);
    for i in 0..cfg.n_games {
        let id = format!("synth-{}-{i:04}", cfg.seed);
        dataset.train.push(match cfg.schema {
            RecordSchema::Rw4 => basketball_game(&mut rng, id, cfg),
            RecordSchema::Mlb6 => baseball_game(&mut rng, id, cfg),
        });
    }
    Ok(dataset)
}

#[derive(Clone, Debug)]
struct Player {
    first: String,
    last: String,
    home: bool,
    stats: Vec<(&'static str, String)>,
}

impl Player {
    fn full(&self) -> String {
        format!("{} {}", self.first, self.last)
    }

    fn stat(&self, rtype: &str) -> Option<&str> {
        self.stats
            .iter()
            .find(|(t, _)| *t == rtype)
            .map(|(_, v)| v.as_str())
    }

    fn stat_num(&self, rtype: &str) -> u32 {
        self.stat(rtype).and_then(|v| v.parse().ok()).unwrap_or(0)
    }
}

fn roster(rng: &mut ChaCha8Rng, n_players: usize) -> Vec<Player> {
    let lasts: Vec<&str> = LAST_NAMES
        .choose_multiple(rng, n_players)
        .copied()
        .collect();
    lasts
        .into_iter()
        .enumerate()
        .map(|(i, last)| Player {
            first: FIRST_NAMES.choose(rng).expect("non-empty").to_string(),
            last: last.to_string(),
            home: i % 2 == 0,
            stats: Vec::new(),
        })
        .collect()
}

fn side_of(home: bool) -> &'static str {
    if home {
        HOME
    } else {
        AWAY
    }
}

/// Appends the words of `text` to the summary.
fn say(summary: &mut Vec<String>, text: &str) {
    summary.extend(text.split(' ').map(str::to_string));
}

struct Mentions(Vec<String>);

impl Mentions {
    /// Full name on first mention, surname afterwards.
    fn name(&mut self, p: &Player) -> String {
        if self.0.contains(&p.full()) {
            p.last.clone()
        } else {
            self.0.push(p.full());
            p.full()
        }
    }
}

fn player_records(p: &Player, schema: RecordSchema) -> Vec<Record> {
    let full = p.full();
    let names = [p.first.as_str(), p.last.as_str()];
    NAME_TYPES
        .iter()
        .zip(names)
        .map(|(t, v)| (*t, v.to_string()))
        .chain(p.stats.iter().map(|(t, v)| (*t, v.clone())))
        .map(|(t, v)| {
            let mut f = vec![v, full.clone(), t.to_string(), side_of(p.home).to_string()];
            if schema == RecordSchema::Mlb6 {
                f.extend([NO_VALUE.to_string(), NO_VALUE.to_string()]);
            }
            Record { features: f }
        })
        .collect()
}

fn team_records(
    team: &str,
    home: bool,
    stats: &[(&str, String)],
    schema: RecordSchema,
) -> Vec<Record> {
    std::iter::once(("TEAM-NAME", team.to_string()))
        .chain(stats.iter().map(|(t, v)| (*t, v.clone())))
        .map(|(t, v)| {
            let mut f = vec![
                v,
                team.to_string(),
                t.to_string(),
                side_of(home).to_string(),
            ];
            if schema == RecordSchema::Mlb6 {
                f.extend([NO_VALUE.to_string(), NO_VALUE.to_string()]);
            }
            Record { features: f }
        })
        .collect()
}

fn two_teams(rng: &mut ChaCha8Rng, pool: &[&'static str]) -> (&'static str, &'static str) {
    let picked: Vec<&str> = pool.choose_multiple(rng, 2).copied().collect();
    (picked[0], picked[1])
}

/// Home players, home line, away players, away line.
fn box_records(
    players: &[Player],
    teams: [(&str, Vec<(&str, String)>); 2],
    schema: RecordSchema,
) -> Vec<Record> {
    let mut records = Vec::new();
    for (home, (team, stats)) in [true, false].into_iter().zip(teams) {
        for p in players.iter().filter(|p| p.home == home) {
            records.extend(player_records(p, schema));
        }
        records.extend(team_records(team, home, &stats, schema));
    }
    records
}

fn opening(summary: &mut Vec<String>, teams: [(&str, u32); 2], unit: &str) {
    let (winner, loser) = if teams[0].1 > teams[1].1 {
        (teams[0], teams[1])
    } else {
        (teams[1], teams[0])
    };
    say(
        summary,
        &format!(
            "The {} scored {} {unit} to beat the {} , who scored {} {unit} .",
            winner.0, winner.1, loser.0, loser.1
        ),
    );
}

fn basketball_game(rng: &mut ChaCha8Rng, id: String, cfg: &SynthConfig) -> GameInstance {
    let (home_team, away_team) = two_teams(rng, &BASKETBALL_TEAMS);
    let mut players = roster(rng, cfg.n_entities - 2);
    for p in &mut players {
        for &(t, lo, hi, _) in &BASKETBALL_STATS[..cfg.n_types] {
            p.stats.push((t, rng.gen_range(lo..=hi).to_string()));
        }
    }
    let mut score = [0u32; 2];
    for (s, home) in score.iter_mut().zip([true, false]) {
        let own: u32 = players
            .iter()
            .filter(|p| p.home == home)
            .map(|p| p.stat_num("PTS"))
            .sum();
        *s = own + rng.gen_range(40..=70);
    }
    if score[0] == score[1] {
        score[0] += 1;
    }
    let records = box_records(
        &players,
        [
            (home_team, vec![("TEAM-PTS", score[0].to_string())]),
            (away_team, vec![("TEAM-PTS", score[1].to_string())]),
        ],
        RecordSchema::Rw4,
    );

    let lex = lexicon();
    let mut summary = Vec::new();
    opening(
        &mut summary,
        [(home_team, score[0]), (away_team, score[1])],
        "points",
    );
    let mut ranked: Vec<&Player> = players.iter().collect();
    ranked.sort_by(|a, b| {
        b.stat_num("PTS")
            .cmp(&a.stat_num("PTS"))
            .then_with(|| a.full().cmp(&b.full()))
    });
    let scorers = ranked
        .iter()
        .take_while(|p| p.stat_num("PTS") >= 10)
        .count()
        .max(1);
    for p in ranked.into_iter().take(scorers.min(MAX_PLAYER_MENTIONS)) {
        let team = if p.home { home_team } else { away_team };
        say(
            &mut summary,
            &format!(
                "{} scored {} points for the {team} .",
                p.full(),
                p.stat_num("PTS")
            ),
        );
        let extras: Vec<String> = BASKETBALL_STATS[1..cfg.n_types]
            .iter()
            .filter(|&&(t, _, _, threshold)| p.stat_num(t) >= threshold)
            .map(|&(t, ..)| {
                format!(
                    "{} {}",
                    p.stat_num(t),
                    lex.stat_word(t).expect("lexicon covers stats")
                )
            })
            .collect();
        if let Some((last, rest)) = extras.split_last() {
            let list = if rest.is_empty() {
                last.clone()
            } else {
                format!("{} and {last}", rest.join(" , "))
            };
            say(&mut summary, &format!("{} added {list} .", p.last));
        }
    }
    GameInstance {
        id,
        records,
        summary,
    }
}

fn baseball_game(rng: &mut ChaCha8Rng, id: String, cfg: &SynthConfig) -> GameInstance {
    let (home_team, away_team) = two_teams(rng, &BASEBALL_TEAMS);
    let mut players = roster(rng, cfg.n_entities - 2);
    // the first player listed for each side pitches
    let mut is_pitcher = vec![false; players.len()];
    for home in [true, false] {
        if let Some(i) = players.iter().position(|p| p.home == home) {
            is_pitcher[i] = true;
        }
    }
    for (p, &pitcher) in players.iter_mut().zip(&is_pitcher) {
        if pitcher {
            let ip = format!("{}.{}", rng.gen_range(3..=8), rng.gen_range(0..=2));
            p.stats.push(("P_IP", ip));
            for (t, hi) in [("P_H", 9), ("P_R", 6), ("P_BB", 4), ("P_K", 10)] {
                p.stats.push((t, rng.gen_range(0..=hi).to_string()));
            }
        } else {
            for &(t, lo, hi) in &BATTER_STATS[..cfg.n_types] {
                p.stats.push((t, rng.gen_range(lo..=hi).to_string()));
            }
        }
    }
    let mut runs = [rng.gen_range(0..=9u32), rng.gen_range(0..=9u32)];
    if runs[0] == runs[1] {
        runs[0] += 1;
    }
    let team_line = |rng: &mut ChaCha8Rng, r: u32| {
        vec![
            ("TEAM-R", r.to_string()),
            ("TEAM-H", (r + rng.gen_range(2..=6)).to_string()),
            ("TEAM-E", rng.gen_range(0..=2).to_string()),
        ]
    };
    let home_line = team_line(rng, runs[0]);
    let away_line = team_line(rng, runs[1]);
    let mut records = box_records(
        &players,
        [(home_team, home_line), (away_team, away_line)],
        RecordSchema::Mlb6,
    );

    let batters: Vec<usize> = (0..players.len()).filter(|&i| !is_pitcher[i]).collect();
    let mut plays = Vec::new();
    if !batters.is_empty() {
        let n_plays = rng.gen_range(2..=5);
        let mut innings: Vec<usize> = (1..=9)
            .collect::<Vec<_>>()
            .choose_multiple(rng, n_plays)
            .copied()
            .collect();
        innings.sort_unstable();
        for (idx, inning) in innings.into_iter().enumerate() {
            let b = *batters.choose(rng).expect("non-empty");
            let event = *EVENTS.choose(rng).expect("non-empty");
            records.push(Record::new([
                NO_VALUE.to_string(),
                players[b].full(),
                event.to_string(),
                side_of(players[b].home).to_string(),
                inning.to_string(),
                idx.to_string(),
            ]));
            plays.push((inning, b, event));
        }
    }

    let lex = lexicon();
    let mut summary = Vec::new();
    let mut mentions = Mentions(Vec::new());
    opening(
        &mut summary,
        [(home_team, runs[0]), (away_team, runs[1])],
        "runs",
    );
    let winner_home = runs[0] > runs[1];
    if let Some(p) = players
        .iter()
        .zip(&is_pitcher)
        .find(|(p, &pitch)| pitch && p.home == winner_home)
        .map(|(p, _)| p)
    {
        let name = mentions.name(p);
        say(
            &mut summary,
            &format!(
                "{name} pitched {} innings , allowing {} runs on {} hits .",
                p.stat("P_IP").unwrap_or(NO_VALUE),
                p.stat_num("P_R"),
                p.stat_num("P_H")
            ),
        );
    }
    for (inning, b, event) in plays {
        let name = mentions.name(&players[b]);
        let verb = lex.event_word(event).expect("lexicon covers events");
        let ord = ordinal(inning).expect("innings 1-9");
        say(
            &mut summary,
            &format!("In the {ord} inning , {name} {verb} ."),
        );
    }
    let best = batters.iter().map(|&i| &players[i]).max_by(|a, b| {
        (a.stat_num("H"), a.stat_num("RBI"))
            .cmp(&(b.stat_num("H"), b.stat_num("RBI")))
            .then_with(|| b.full().cmp(&a.full()))
    });
    if let Some(p) = best.filter(|p| p.stat_num("H") >= 2) {
        let name = mentions.name(p);
        let rbi = p
            .stat("RBI")
            .map(|r| format!(" and {r} RBI"))
            .unwrap_or_default();
        say(
            &mut summary,
            &format!("{name} had {} hits{rbi} .", p.stat_num("H")),
        );
    }
    GameInstance {
        id,
        records,
        summary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::jsonl::to_jsonl;

    fn mlb(seed: u64) -> Dataset {
        synth_dataset(&SynthConfig {
            schema: RecordSchema::Mlb6,
            seed,
            n_games: 8,
            n_entities: 8,
            n_types: 3,
        })
        .unwrap()
    }

    #[test]
    fn same_seed_is_byte_identical() {
        let a = synth_games(7, 16, 6, 4).unwrap();
        let b = synth_games(7, 16, 6, 4).unwrap();
        assert_eq!(to_jsonl(&a.train), to_jsonl(&b.train));
        assert_eq!(to_jsonl(&mlb(3).train), to_jsonl(&mlb(3).train));
        assert_ne!(
            to_jsonl(&a.train),
            to_jsonl(&synth_games(8, 16, 6, 4).unwrap().train)
        );
    }

    #[test]
    fn four_games_with_disjoint_ids() {
        let ds = synth_games(1, 4, 6, 3).unwrap();
        assert_eq!(ds.train.len(), 4);
        ds.validate().unwrap();
    }

    #[test]
    fn entity_count_includes_teams() {
        let ds = synth_games(2, 3, 6, 2).unwrap();
        for g in &ds.train {
            assert_eq!(g.entity_groups().len(), 6);
            assert!(!g.summary.is_empty());
        }
        let ds = synth_games(2, 2, 2, 2).unwrap();
        assert_eq!(ds.train[0].entity_groups().len(), 2);
    }

    #[test]
    fn baseball_games_follow_record_order() {
        for g in &mlb(5).train {
            g.validate(RecordSchema::Mlb6).unwrap();
            let first_play = g
                .records
                .iter()
                .position(|r| r.value() == NO_VALUE)
                .unwrap_or(g.records.len());
            assert!(g.records[..first_play]
                .iter()
                .all(|r| r.inning() == Some(NO_VALUE)));
            let innings: Vec<u32> = g.records[first_play..]
                .iter()
                .map(|r| r.inning().unwrap().parse().unwrap())
                .collect();
            assert!(innings.windows(2).all(|w| w[0] < w[1]));
            let sides: Vec<&str> = g.records[..first_play].iter().map(Record::side).collect();
            assert!(sides.windows(2).all(|w| !(w[0] == AWAY && w[1] == HOME)));
        }
    }

    #[test]
    fn later_mentions_use_surname() {
        let ds = mlb(11);
        let mut saw_surname_only = false;
        for g in &ds.train {
            let text = g.summary.join(" ");
            for group in g.entity_groups().names {
                if let Some((first, last)) = group.split_once(' ') {
                    let full = text.matches(group.as_str()).count();
                    let total = text.matches(last).count();
                    if full > 0 {
                        assert_eq!(full, 1, "{first} {last} introduced twice in {text}");
                        saw_surname_only |= total > full;
                    } else {
                        assert_eq!(total, 0, "{last} used before introduction");
                    }
                }
            }
        }
        assert!(saw_surname_only);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(synth_games(1, 1, 1, 3).is_err());
        assert!(synth_games(1, 1, 4, 1).is_err());
        assert!(synth_games(1, 1, 4, 9).is_err());
    }
}
