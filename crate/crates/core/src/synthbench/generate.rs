use std::collections::{BTreeMap, BTreeSet};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{LogNormal, StandardNormal, Zipf};
use rayon::prelude::*;

use super::{CampaignSpec, Dataset, GroundTruth, OrganicConfig, Scenario, Timing};
use crate::error::{Error, Result};
use crate::ingest::{CommentRecord, EmbeddingKind, EmbeddingRecord, PostRecord};
use crate::traces::TraceKind;

const DAY: i64 = 86_400;
const SYNC_BIN: i64 = 300;

const POPULAR_TAGS: &[&str] = &[
    "fyp", "foryou", "viral", "trending", "news", "funny", "love", "music", "dance", "comedy", "food",
    "travel", "sports", "politics", "art", "pets", "fashion", "gaming", "fitness", "diy",
];

const POPULAR_DOMAINS: &[&str] = &[
    "youtube.com", "x.com", "instagram.com", "facebook.com", "reddit.com", "wikipedia.org",
    "nytimes.com", "bbc.co.uk", "cnn.com", "foxnews.com", "amazon.com", "spotify.com",
    "linktr.ee", "substack.com", "medium.com", "apnews.com", "reuters.com", "theguardian.com",
    "washingtonpost.com", "npr.org",
];

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mi", "ra", "te", "su", "no", "vi", "da", "pe", "zo", "ri", "ma", "lu", "be", "ta",
    "ne", "go", "sa", "fi", "do", "le", "ku", "pa", "ji", "ro", "ve", "mo", "ha", "ni",
];

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for `label`, stable across platforms and releases.
fn stream(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(seed ^ splitmix(fnv1a(label.as_bytes()))))
}

fn unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.iter().map(|x| (x / norm) as f32).collect();
        }
    }
}

fn word<R: Rng>(rng: &mut R) -> String {
    let n = rng.random_range(2..=3);
    (0..n).map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())]).collect()
}

fn sentence<R: Rng>(rng: &mut R, n: usize) -> String {
    (0..n).map(|_| word(rng)).collect::<Vec<_>>().join(" ")
}

fn autogen_name<R: Rng>(rng: &mut R) -> String {
    let mut s = String::from("user");
    s.push(char::from(b'1' + rng.random_range(0..9u8)));
    for _ in 0..12 {
        s.push(char::from(b'0' + rng.random_range(0..10u8)));
    }
    s
}

fn path<R: Rng>(rng: &mut R) -> String {
    format!("{}/{}", word(rng), rng.random_range(1000..99999u32))
}

fn url_for<R: Rng>(rng: &mut R, domain: &str) -> String {
    let host = if rng.random_bool(0.3) { format!("www.{domain}") } else { domain.to_string() };
    format!("https://{host}/{}", path(rng))
}

fn hashtag_name(rank: usize) -> String {
    POPULAR_TAGS.get(rank).map_or_else(|| format!("tag{rank}"), |t| t.to_string())
}

fn popular_domain(rank: usize) -> String {
    POPULAR_DOMAINS.get(rank).map_or_else(|| format!("portal{rank}.com"), |d| d.to_string())
}

fn describe(text: &str, hashtags: &[String], urls: &[String]) -> String {
    let mut parts = vec![text.to_string()];
    parts.extend(hashtags.iter().map(|t| format!("#{t}")));
    parts.extend(urls.iter().cloned());
    parts.join(" ")
}

fn zipf_rank<R: Rng>(rng: &mut R, z: &Zipf<f64>) -> usize {
    z.sample(rng) as usize - 1
}

fn blank_post(post_id: String, user_id: &str, username: &str, timestamp: i64) -> PostRecord {
    PostRecord {
        post_id,
        user_id: user_id.to_string(),
        username: username.to_string(),
        timestamp,
        description: String::new(),
        hashtags: Vec::new(),
        urls: Vec::new(),
        duet_target: None,
        stitch_target: None,
        reply_target: None,
        transcript: None,
    }
}

/// Friends who reuse each other's niche hashtags and link the same site.
struct Circle {
    sequences: Vec<Vec<String>>,
    domain: String,
}

/// Circle membership per organic user: runs of 2 to 5 consecutive users,
/// covering about `circle_fraction` of the population.
fn circles(cfg: &OrganicConfig, seed: u64) -> Vec<Option<usize>> {
    let mut rng = stream(seed, "circles");
    let f = cfg.circle_fraction;
    let p_start = if f >= 1.0 { 1.0 } else { f / (3.5 - 2.5 * f) };
    let mut out = vec![None; cfg.users];
    let mut i = 0;
    let mut id = 0;
    while i < cfg.users {
        if rng.random_bool(p_start) {
            let g = rng.random_range(2..=5).min(cfg.users - i);
            for slot in &mut out[i..i + g] {
                *slot = Some(id);
            }
            id += 1;
            i += g;
        } else {
            i += 1;
        }
    }
    out
}

fn circle(id: usize, s: &Samplers, seed: u64) -> Circle {
    let mut rng = stream(seed, &format!("circle:{id}"));
    let sequences = (0..2)
        .map(|_| {
            let len = rng.random_range(3..=4);
            let mut ranks: Vec<usize> = Vec::with_capacity(len);
            while ranks.len() < len {
                let r = zipf_rank(&mut rng, &s.tags);
                if !ranks.contains(&r) {
                    ranks.push(r);
                }
            }
            ranks.into_iter().map(hashtag_name).collect()
        })
        .collect();
    Circle { sequences, domain: format!("circle{id}-club.net") }
}

struct UserOutput {
    posts: Vec<PostRecord>,
    embeddings: Vec<EmbeddingRecord>,
    /// Domains the user links to: tails, then one popular; empty for non-linkers.
    favorites: Vec<String>,
    commenter: bool,
}

struct Samplers {
    hours: WeightedIndex<f64>,
    extra_posts: LogNormal<f64>,
    tags: Zipf<f64>,
    popular: Zipf<f64>,
    creators: Zipf<f64>,
}

impl Samplers {
    fn new(cfg: &OrganicConfig) -> Result<Self> {
        let bad = |e: rand_distr::ZipfError| Error::config(format!("organic config: {e}"));
        // Activity peaks in the evening UTC and bottoms out twelve hours later.
        let weights: Vec<f64> = (0..24)
            .map(|h| 1.0 + 0.8 * (2.0 * std::f64::consts::PI * (h as f64 - 20.0) / 24.0).cos())
            .collect();
        Ok(Samplers {
            hours: WeightedIndex::new(weights).expect("positive weights"),
            extra_posts: LogNormal::new(cfg.posts_mu, cfg.posts_sigma)
                .map_err(|e| Error::config(format!("organic config: {e}")))?,
            tags: Zipf::new(cfg.hashtag_vocab as f64, cfg.hashtag_zipf).map_err(bad)?,
            popular: Zipf::new(cfg.popular_domains as f64, 1.0).map_err(bad)?,
            creators: Zipf::new(cfg.creators as f64, cfg.creator_zipf).map_err(bad)?,
        })
    }
}

fn organic_user(i: usize, cfg: &OrganicConfig, s: &Samplers, circle: Option<&Circle>, seed: u64) -> UserOutput {
    let user_id = format!("o{i:06}");
    let mut rng = stream(seed, &user_id);
    let username = if rng.random_bool(cfg.autogen_fraction) {
        autogen_name(&mut rng)
    } else {
        format!("{}{}{}", word(&mut rng), word(&mut rng), rng.random_range(0..1000u32))
    };
    let extra = s.extra_posts.sample(&mut rng).floor() as usize;
    let n = (cfg.min_posts + extra).min(cfg.max_posts);

    let mut times: Vec<i64> = (0..n)
        .map(|_| {
            let day = rng.random_range(0..cfg.days) as i64;
            let hour = s.hours.sample(&mut rng) as i64;
            cfg.start + day * DAY + hour * 3600 + rng.random_range(0..3600)
        })
        .collect();
    times.sort_unstable();
    let mut posts: Vec<PostRecord> = times
        .iter()
        .enumerate()
        .map(|(k, &t)| blank_post(format!("{user_id}-{k:04}"), &user_id, &username, t))
        .collect();

    if !rng.random_bool(cfg.hashtag_free_fraction) {
        for p in posts.iter_mut() {
            if !rng.random_bool(cfg.hashtag_rate) {
                continue;
            }
            if let Some(c) = circle {
                if rng.random_bool(cfg.circle_share) {
                    p.hashtags = c.sequences[rng.random_range(0..c.sequences.len())].clone();
                    continue;
                }
            }
            let len = match rng.random_range(0..100) {
                0..2 => 2,
                2..35 => 3,
                35..65 => 4,
                65..85 => 5,
                _ => 6,
            };
            let mut ranks: Vec<usize> = Vec::with_capacity(len);
            while ranks.len() < len {
                let r = zipf_rank(&mut rng, &s.tags);
                if !ranks.contains(&r) {
                    ranks.push(r);
                }
            }
            p.hashtags = ranks.into_iter().map(hashtag_name).collect();
        }
    }

    // Interaction roles always span several targets, one of them obscure,
    // so that no organic row collapses onto a single popular entity.
    let mut favorites = Vec::new();
    let linker_p = if circle.is_some() { cfg.circle_linker_fraction } else { cfg.linker_fraction };
    if n >= 6 && rng.random_bool(linker_p) {
        let tails = rng.random_range(2..=4);
        for _ in 0..tails {
            favorites.push(format!("tail{}-site.org", rng.random_range(0..cfg.tail_domains)));
        }
        favorites.push(popular_domain(zipf_rank(&mut rng, &s.popular)));
        let k = ((n as f64 * 0.3).round() as usize).clamp(6, n);
        let mut idx = sample(&mut rng, n, k).into_vec();
        idx.sort_unstable();
        for (j, &pi) in idx.iter().enumerate() {
            let domain = match (j, circle) {
                (0, _) => favorites[0].clone(),
                (1, _) => favorites[tails].clone(),
                (_, Some(c)) if rng.random_bool(cfg.circle_share) => c.domain.clone(),
                _ => favorites[rng.random_range(0..tails)].clone(),
            };
            let u = url_for(&mut rng, &domain);
            posts[pi].urls.push(u);
        }
    }

    for role in 0..3 {
        let frac = [cfg.duet_fraction, cfg.stitch_fraction, cfg.reply_fraction][role];
        if !rng.random_bool(frac) {
            continue;
        }
        let k = rng.random_range(3..=5).min(n);
        for (j, pi) in sample(&mut rng, n, k).into_iter().enumerate() {
            let target = if j == 0 {
                format!("creator{}", cfg.creators + rng.random_range(0..cfg.creators * 20))
            } else {
                format!("creator{}", zipf_rank(&mut rng, &s.creators))
            };
            let p = &mut posts[pi];
            match role {
                0 => p.duet_target = Some(target),
                1 => p.stitch_target = Some(target),
                _ => p.reply_target = Some(target),
            }
        }
    }

    let mut embeddings = Vec::with_capacity(2 * n);
    for p in posts.iter_mut() {
        let words = rng.random_range(2..8);
        let text = sentence(&mut rng, words);
        p.description = describe(&text, &p.hashtags, &p.urls);
        if rng.random_bool(cfg.speech_fraction) {
            let len = if rng.random_bool(cfg.short_transcript_fraction) {
                rng.random_range(1..=3)
            } else {
                rng.random_range(5..=25)
            };
            p.transcript = Some(sentence(&mut rng, len));
            embeddings.push(EmbeddingRecord {
                post_id: p.post_id.clone(),
                kind: EmbeddingKind::Speech,
                vector: unit_vector(&mut rng, cfg.embedding_dim),
            });
        }
        embeddings.push(EmbeddingRecord {
            post_id: p.post_id.clone(),
            kind: EmbeddingKind::Video,
            vector: unit_vector(&mut rng, cfg.embedding_dim),
        });
    }
    let commenter = rng.random_bool(cfg.commenter_fraction);
    UserOutput { posts, embeddings, favorites, commenter }
}

fn organic_comments(
    user_id: &str,
    favorites: &[String],
    circle_domain: Option<&str>,
    pool: &[(&str, i64)],
    seed: u64,
) -> Vec<CommentRecord> {
    let mut rng = stream(seed, &format!("comments:{user_id}"));
    let n = rng.random_range(3..=8);
    (0..n)
        .map(|k| {
            let (post_id, t) = pool[rng.random_range(0..pool.len())];
            let mut urls = Vec::new();
            if !favorites.is_empty() && (k < 3 || rng.random_bool(0.3)) {
                let tails = favorites.len() - 1;
                let domain = match (k, circle_domain) {
                    (1, _) => &favorites[tails],
                    (0, _) => &favorites[0],
                    (_, Some(d)) if rng.random_bool(0.4) => d,
                    _ => &favorites[rng.random_range(0..tails)],
                };
                urls.push(url_for(&mut rng, domain));
            }
            let words = rng.random_range(2..10);
            let text = describe(&sentence(&mut rng, words), &[], &urls);
            CommentRecord {
                comment_id: format!("{user_id}-c{k:03}"),
                post_id: post_id.to_string(),
                user_id: user_id.to_string(),
                text,
                urls,
                timestamp: t + rng.random_range(60..DAY),
            }
        })
        .collect()
}

struct CampaignOutput {
    posts: Vec<PostRecord>,
    comments: Vec<CommentRecord>,
    embeddings: Vec<EmbeddingRecord>,
    members: BTreeSet<String>,
}

fn campaign_usernames(spec: &CampaignSpec, seed: u64) -> Vec<String> {
    (0..spec.size)
        .map(|k| {
            let mut rng = stream(seed, &format!("username:{}", spec.member_id(k)));
            if spec.username.autogen {
                autogen_name(&mut rng)
            } else {
                format!("{}_{}{}", spec.username.prefix, word(&mut rng), rng.random_range(10..1000u32))
            }
        })
        .collect()
}

fn run_campaign(
    spec: &CampaignSpec,
    cfg: &OrganicConfig,
    organic_posts: &[(&str, i64)],
    seed: u64,
) -> Result<CampaignOutput> {
    let dim = cfg.embedding_dim;
    if let Some(base) = &spec.embedding.base {
        if base.len() != dim {
            return Err(Error::config(format!(
                "campaign {:?}: base vector has dimension {}, corpus uses {dim}",
                spec.name,
                base.len()
            )));
        }
    }
    let mut rng = stream(seed, &format!("campaign:{}", spec.name));
    let usernames = campaign_usernames(spec, seed);
    let has = |t: TraceKind| spec.traces.contains(&t);

    let sequences: Vec<Vec<String>> = (0..spec.sequences)
        .map(|_| {
            let mut pool = spec.hashtag_pool.clone();
            pool.shuffle(&mut rng);
            pool.truncate(spec.sequence_length);
            pool
        })
        .collect();
    let video_base = spec.embedding.base.clone().unwrap_or_else(|| unit_vector(&mut rng, dim));
    let speech_base = unit_vector(&mut rng, dim);
    let script = sentence(&mut rng, 12);

    let (h0, h1) = spec.posting_window;
    let window = i64::from(h1 - h0) * 3600;
    let active = ((spec.participation * spec.size as f64).round() as usize).clamp(2, spec.size);
    let mut counts = vec![0usize; spec.size];
    let mut out = CampaignOutput {
        posts: Vec::new(),
        comments: Vec::new(),
        embeddings: Vec::new(),
        members: (0..spec.size).map(|k| spec.member_id(k)).collect(),
    };

    for s in 0..spec.sessions {
        let day = ((s as f64 + 0.5) * f64::from(cfg.days) / spec.sessions as f64).floor() as i64;
        let mut who = sample(&mut rng, spec.size, active).into_vec();
        who.shuffle(&mut rng);
        let span = match spec.timing {
            Timing::Staggered => (active as i64 - 1) * i64::from(spec.cadence_seconds),
            _ => 0,
        };
        let slack = (window - span - SYNC_BIN).max(1);
        let start = cfg.start + day * DAY + i64::from(h0) * 3600 + rng.random_range(0..slack);
        let bin_start = start - start.rem_euclid(SYNC_BIN);
        let jitter = i64::from(spec.cadence_seconds / 4).clamp(1, 30);

        for (j, &m) in who.iter().enumerate() {
            let user_id = spec.member_id(m);
            let t = match spec.timing {
                Timing::Staggered => start + j as i64 * i64::from(spec.cadence_seconds) + rng.random_range(0..jitter),
                Timing::Simultaneous => start,
                Timing::SameBin => bin_start + rng.random_range(0..SYNC_BIN),
            };
            let post_id = format!("{user_id}-{:04}", counts[m]);
            counts[m] += 1;
            let mut p = blank_post(post_id.clone(), &user_id, &usernames[m], t);
            if has(TraceKind::HashtagSequence) {
                p.hashtags = sequences[s % sequences.len()].clone();
            }
            if has(TraceKind::CoDomainDescription) {
                let domain = &spec.domain_pool[(s + j) % spec.domain_pool.len()];
                p.urls.push(url_for(&mut rng, domain));
            }
            if !spec.target_pool.is_empty() {
                let target = spec.target_pool[s % spec.target_pool.len()].clone();
                if has(TraceKind::CoDuet) {
                    p.duet_target = Some(target.clone());
                }
                if has(TraceKind::CoStitch) {
                    p.stitch_target = Some(target.clone());
                }
                if has(TraceKind::CoReply) {
                    p.reply_target = Some(target);
                }
            }
            if has(TraceKind::SpeechSimilarity) {
                p.transcript = Some(script.clone());
                out.embeddings.push(EmbeddingRecord {
                    post_id: post_id.clone(),
                    kind: EmbeddingKind::Speech,
                    vector: speech_base.clone(),
                });
            }
            let video = if has(TraceKind::VideoSimilarity) {
                if rng.random_bool(spec.duplication_rate) {
                    video_base.clone()
                } else {
                    video_base
                        .iter()
                        .map(|&v| {
                            let e: f64 = rng.sample(StandardNormal);
                            (f64::from(v) + spec.embedding.sigma * e) as f32
                        })
                        .collect()
                }
            } else {
                unit_vector(&mut rng, dim)
            };
            out.embeddings.push(EmbeddingRecord { post_id: post_id.clone(), kind: EmbeddingKind::Video, vector: video });
            let words = rng.random_range(3..8);
            let text = sentence(&mut rng, words);
            p.description = describe(&text, &p.hashtags, &p.urls);
            out.posts.push(p);

            if has(TraceKind::CoDomainComment) && !organic_posts.is_empty() {
                let (target, _) = organic_posts[rng.random_range(0..organic_posts.len())];
                let domain = &spec.domain_pool[(s + j) % spec.domain_pool.len()];
                let urls = vec![url_for(&mut rng, domain)];
                out.comments.push(CommentRecord {
                    comment_id: format!("{user_id}-c{:03}", counts[m] - 1),
                    post_id: target.to_string(),
                    user_id: user_id.clone(),
                    text: describe(&sentence(&mut rng, 4), &[], &urls),
                    urls,
                    timestamp: t,
                });
            }
        }
    }
    Ok(out)
}

/// Posts, embeddings and ground truth for the campaigns in `specs` on top
/// of an organic background.
pub fn generate(
    specs: &[CampaignSpec],
    organic: &OrganicConfig,
    seed: u64,
) -> Result<(Vec<PostRecord>, Vec<EmbeddingRecord>, GroundTruth)> {
    let scenario = Scenario { name: String::new(), organic: organic.clone(), campaigns: specs.to_vec() };
    let d = generate_dataset(&scenario, seed)?;
    Ok((d.posts, d.embeddings, d.truth))
}

/// Deterministic in `(scenario, seed)` whatever the thread count: every
/// user draws from its own stream keyed by a stable hash of its id.
pub fn generate_dataset(scenario: &Scenario, seed: u64) -> Result<Dataset> {
    scenario.validate()?;
    let cfg = &scenario.organic;
    let samplers = Samplers::new(cfg)?;

    let mut truth = GroundTruth::default();
    let mut seen = BTreeSet::new();
    for spec in &scenario.campaigns {
        let members: BTreeSet<String> = (0..spec.size).map(|k| spec.member_id(k)).collect();
        for m in &members {
            if !seen.insert(m.clone()) {
                return Err(Error::config(format!("user id {m:?} appears in more than one campaign")));
            }
        }
        if truth.campaigns.insert(spec.name.clone(), members).is_some() {
            return Err(Error::config(format!("duplicate campaign name {:?}", spec.name)));
        }
    }
    truth.organic = (0..cfg.users).map(|i| format!("o{i:06}")).collect();
    if let Some(u) = truth.organic.iter().find(|u| seen.contains(*u)) {
        return Err(Error::config(format!("user id {u:?} is both organic and planted")));
    }

    let membership = circles(cfg, seed);
    let n_circles = membership.iter().flatten().max().map_or(0, |&m| m + 1);
    let circle_defs: Vec<Circle> = (0..n_circles).map(|c| circle(c, &samplers, seed)).collect();
    let users: Vec<UserOutput> = (0..cfg.users)
        .into_par_iter()
        .map(|i| organic_user(i, cfg, &samplers, membership[i].map(|c| &circle_defs[c]), seed))
        .collect();

    let pool: Vec<(&str, i64)> =
        users.iter().flat_map(|u| u.posts.iter().map(|p| (p.post_id.as_str(), p.timestamp))).collect();
    let mut comments: Vec<CommentRecord> = users
        .par_iter()
        .enumerate()
        .filter(|(_, u)| u.commenter && !u.posts.is_empty())
        .flat_map_iter(|(i, u)| {
            let domain = membership[i].map(|c| circle_defs[c].domain.as_str());
            organic_comments(&u.posts[0].user_id, &u.favorites, domain, &pool, seed)
        })
        .collect();

    let campaigns: Vec<CampaignOutput> = scenario
        .campaigns
        .par_iter()
        .map(|spec| run_campaign(spec, cfg, &pool, seed))
        .collect::<Result<_>>()?;
    drop(pool);

    let mut posts = Vec::new();
    let mut embeddings = Vec::new();
    for u in users {
        posts.extend(u.posts);
        embeddings.extend(u.embeddings);
    }
    let mut by_campaign: BTreeMap<&str, BTreeSet<String>> = BTreeMap::new();
    for (spec, c) in scenario.campaigns.iter().zip(campaigns) {
        by_campaign.insert(&spec.name, c.members);
        posts.extend(c.posts);
        comments.extend(c.comments);
        embeddings.extend(c.embeddings);
    }
    posts.sort_by(|a, b| (a.timestamp, &a.post_id).cmp(&(b.timestamp, &b.post_id)));
    comments.sort_by(|a, b| (a.timestamp, &a.comment_id).cmp(&(b.timestamp, &b.comment_id)));
    embeddings.sort_by(|a, b| (&a.post_id, a.kind).cmp(&(&b.post_id, b.kind)));
    Ok(Dataset { posts, comments, embeddings, truth })
}
