//! The fixed registry of expertise features.
//!
//! Every feature is named `<NETWORK>_<SOURCE>_<ATTRIBUTION>`. See
//! `docs/feature_catalog.md` for what each row measures.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::Error;

macro_rules! string_enum {
    ($(#[$meta:meta])* $name:ident, $what:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(
                #[serde(rename = $text)]
                $variant,
            )+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(Error::Parse(format!(concat!("unknown ", $what, " \"{}\""), other))),
                }
            }
        }
    };
}

string_enum!(
    /// Social network (or external corpus) a feature originates from.
    Network, "network" {
        Twitter => "TW",
        Facebook => "FB",
        FacebookPage => "FB_PAGE",
        GooglePlus => "GP",
        LinkedIn => "LI",
        Wikipedia => "WIKI",
    }
);

string_enum!(
    /// Source data type of a feature.
    Source, "source" {
        MsgText => "MSG_TEXT",
        PageText => "PAGE_TEXT",
        Hashtag => "HASHTAG",
        List => "LIST",
        Skills => "SKILLS",
        Industry => "INDUSTRY",
        Followers => "FOLLOWERS",
        Following => "FOLLOWING",
        Friends => "FRIENDS",
        Url => "URL",
        UrlMeta => "URL_META",
        SocialWww => "SOCIAL_WWW",
        WikiInout => "WIKI_INOUT",
    }
);

string_enum!(
    /// Relation of the underlying content to the user the feature describes.
    Attribution, "attribution" {
        Generated => "GENERATED",
        Reacted => "REACTED",
        Credited => "CREDITED",
        Graph => "GRAPH",
    }
);

use Attribution::*;
use Network::*;
use Source::*;

/// Number of registered features.
pub const CATALOG_LEN: usize = 37;

/// Registry order. Feature deltas, weight vectors and persisted models all
/// use this order.
pub const CATALOG: [(Network, Source, Attribution); CATALOG_LEN] = [
    (Twitter, MsgText, Generated),
    (Twitter, MsgText, Reacted),
    (Twitter, MsgText, Credited),
    (Twitter, Hashtag, Generated),
    (Twitter, Hashtag, Reacted),
    (Twitter, Hashtag, Credited),
    (Twitter, Url, Generated),
    (Twitter, Url, Reacted),
    (Twitter, UrlMeta, Generated),
    (Twitter, UrlMeta, Reacted),
    (Twitter, List, Credited),
    (Twitter, List, Generated),
    (Twitter, Followers, Graph),
    (Twitter, Following, Graph),
    (Twitter, SocialWww, Generated),
    (Facebook, MsgText, Generated),
    (Facebook, MsgText, Reacted),
    (Facebook, MsgText, Credited),
    (Facebook, Url, Generated),
    (Facebook, Url, Reacted),
    (Facebook, UrlMeta, Generated),
    (Facebook, UrlMeta, Reacted),
    (Facebook, Friends, Graph),
    (FacebookPage, PageText, Generated),
    (FacebookPage, PageText, Reacted),
    (FacebookPage, Url, Generated),
    (FacebookPage, UrlMeta, Generated),
    (GooglePlus, MsgText, Generated),
    (GooglePlus, MsgText, Reacted),
    (GooglePlus, Hashtag, Generated),
    (GooglePlus, Url, Generated),
    (GooglePlus, Url, Reacted),
    (GooglePlus, UrlMeta, Generated),
    (LinkedIn, MsgText, Generated),
    (LinkedIn, Skills, Generated),
    (LinkedIn, Industry, Generated),
    (Wikipedia, WikiInout, Generated),
];

/// Index of a registered feature in [`CATALOG`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureId(u8);

impl FeatureId {
    pub fn all() -> impl Iterator<Item = FeatureId> + Clone {
        (0..CATALOG_LEN as u8).map(FeatureId)
    }

    pub fn from_index(index: usize) -> Option<FeatureId> {
        (index < CATALOG_LEN).then_some(FeatureId(index as u8))
    }

    /// Looks up a triple; `None` when the combination is not registered.
    pub fn lookup(network: Network, source: Source, attribution: Attribution) -> Option<FeatureId> {
        CATALOG
            .iter()
            .position(|&t| t == (network, source, attribution))
            .map(|i| FeatureId(i as u8))
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn network(self) -> Network {
        CATALOG[self.index()].0
    }

    pub fn source(self) -> Source {
        CATALOG[self.index()].1
    }

    pub fn attribution(self) -> Attribution {
        CATALOG[self.index()].2
    }

    pub fn name(self) -> String {
        let (n, s, a) = CATALOG[self.index()];
        format!("{n}_{s}_{a}")
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for FeatureId {
    type Err = Error;

    // Names are not splittable on '_' (FB_PAGE, PAGE_TEXT, ...), so match
    // against the registry instead.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FeatureId::all()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown feature \"{s}\"")))
    }
}

/// Features belonging to one network, in registry order.
pub fn network_features(network: Network) -> Vec<FeatureId> {
    FeatureId::all().filter(|f| f.network() == network).collect()
}

/// Networks that own at least one feature, in order of first appearance.
pub fn networks() -> Vec<Network> {
    let mut out: Vec<Network> = Vec::new();
    for f in FeatureId::all() {
        if !out.contains(&f.network()) {
            out.push(f.network());
        }
    }
    out
}

/// SHA-256 over the newline-joined feature names; identifies the registry a
/// model was trained against.
pub fn catalog_hash() -> String {
    let mut hasher = Sha256::new();
    for f in FeatureId::all() {
        hasher.update(f.name().as_bytes());
        hasher.update(b"\n");
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Registry file: `feature_id<TAB>network<TAB>source<TAB>attribution`.
pub fn registry_tsv() -> String {
    let mut out = String::from("feature_id\tnetwork\tsource\tattribution\n");
    for f in FeatureId::all() {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            f.name(),
            f.network(),
            f.source(),
            f.attribution()
        ));
    }
    out
}
