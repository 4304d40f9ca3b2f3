//! Collects merged pull requests, their commit messages and the comments
//! they add, from the GitHub REST API.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, LazyLock, Mutex};
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use log::{debug, info, warn};
use regex::Regex;
use serde::Deserialize;
use thiserror::Error;

use crate::corpus::PullRequestRecord;
use crate::preprocess::{clean_text, CleaningConfig};

pub const DEFAULT_API_URL: &str = "https://api.github.com";
pub const TOKEN_ENV: &str = "GITHUB_TOKEN";
const PER_PAGE: u32 = 100;

/// Where an interrupted crawl can pick up again.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResumeCursor {
    pub repo: String,
    pub pr: Option<u64>,
    pub url: String,
}

impl fmt::Display for ResumeCursor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.pr {
            Some(n) => write!(f, "{} PR #{} at {}", self.repo, n, self.url),
            None => write!(f, "{} at {}", self.repo, self.url),
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("authentication failed (HTTP {status}); set {TOKEN_ENV}")]
    Auth { status: u16 },
    #[error("not found: {url}")]
    NotFound { url: String },
    #[error("rate limit exhausted until {reset_at} (unix time); resume from {cursor}")]
    RateLimited { cursor: ResumeCursor, reset_at: u64 },
    #[error("network failure ({message}); resume from {cursor}")]
    Network { cursor: ResumeCursor, message: String },
    #[error("unexpected HTTP {status} from {url}")]
    Http { status: u16, url: String },
    #[error("cannot decode response from {url}: {message}")]
    Decode { url: String, message: String },
    #[error("PR {0} is not merged")]
    NotMerged(String),
    #[error("PR {0} has no commit messages")]
    NoCommits(String),
    #[error("bad repository reference {0:?}; expected owner/name [merged_pr_count]")]
    BadRepoRef(String),
}

impl IngestError {
    /// Errors that stop the whole crawl rather than one PR.
    pub fn is_fatal(&self) -> bool {
        matches!(self, Self::Auth { .. } | Self::RateLimited { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepoRef {
    pub owner: String,
    pub name: String,
    pub merged_pr_count: u64,
}

impl RepoRef {
    pub fn full_name(&self) -> String {
        format!("{}/{}", self.owner, self.name)
    }
}

impl FromStr for RepoRef {
    type Err = IngestError;

    /// Parses `owner/name` with an optional merged-PR count after whitespace.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IngestError::BadRepoRef(s.to_string());
        let mut parts = s.split_whitespace();
        let (owner, name) = parts.next().and_then(|p| p.split_once('/')).ok_or_else(bad)?;
        if owner.is_empty() || name.is_empty() || name.contains('/') {
            return Err(bad());
        }
        let merged_pr_count = match parts.next() {
            Some(c) => c.parse().map_err(|_| bad())?,
            None => 0,
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(Self {
            owner: owner.to_string(),
            name: name.to_string(),
            merged_pr_count,
        })
    }
}

/// Parses a repository list, one per line (`#` comments allowed), ordered
/// by descending merged-PR count. Equal counts keep file order.
pub fn parse_repo_list(text: &str) -> Result<Vec<RepoRef>, IngestError> {
    let mut repos = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(RepoRef::from_str)
        .collect::<Result<Vec<_>, _>>()?;
    repos.sort_by_key(|r| std::cmp::Reverse(r.merged_pr_count));
    Ok(repos)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawPullRequest {
    pub repo: RepoRef,
    pub number: u64,
    pub title: String,
    pub body: String,
    pub merged: bool,
    pub commit_shas: Vec<String>,
}

impl RawPullRequest {
    /// `owner/name_number`.
    pub fn record_id(&self) -> String {
        format!("{}_{}", self.repo.full_name(), self.number)
    }
}

#[derive(Deserialize)]
struct PullJson {
    number: u64,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    body: Option<String>,
    #[serde(default)]
    merged_at: Option<String>,
}

#[derive(Deserialize)]
struct CommitDetailJson {
    message: String,
}

#[derive(Deserialize)]
struct CommitJson {
    sha: String,
    commit: CommitDetailJson,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

#[derive(Debug, Default)]
struct BudgetState {
    remaining: Option<u64>,
    reset_at: Option<u64>,
}

/// Request budget shared by every worker, refilled from the
/// `x-ratelimit-*` headers of each response.
pub struct RateBudget {
    state: Mutex<BudgetState>,
    max_wait: Duration,
    sleeper: Arc<dyn Fn(Duration) + Send + Sync>,
}

impl fmt::Debug for RateBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateBudget")
            .field("state", &self.state)
            .field("max_wait", &self.max_wait)
            .finish()
    }
}

impl RateBudget {
    pub fn new(max_wait: Duration, sleeper: Arc<dyn Fn(Duration) + Send + Sync>) -> Self {
        Self {
            state: Mutex::new(BudgetState::default()),
            max_wait,
            sleeper,
        }
    }

    /// Takes one request token, sleeping until the reset time when the
    /// budget is spent. Fails if the wait would exceed `max_wait`.
    fn acquire(&self, cursor: &ResumeCursor) -> Result<(), IngestError> {
        let mut state = self.state.lock().unwrap();
        if state.remaining == Some(0) {
            let reset_at = state.reset_at.unwrap_or(0);
            let wait = Duration::from_secs(reset_at.saturating_sub(unix_now()));
            if wait > self.max_wait {
                return Err(IngestError::RateLimited {
                    cursor: cursor.clone(),
                    reset_at,
                });
            }
            if !wait.is_zero() {
                info!("rate limit spent; sleeping {}s until reset", wait.as_secs());
                (self.sleeper)(wait);
            }
            state.remaining = None;
        }
        if let Some(r) = state.remaining.as_mut() {
            *r -= 1;
        }
        Ok(())
    }

    fn observe(&self, resp: &ureq::Response) {
        let header = |name: &str| resp.header(name).and_then(|v| v.trim().parse::<u64>().ok());
        let mut state = self.state.lock().unwrap();
        if let Some(remaining) = header("x-ratelimit-remaining") {
            state.remaining = Some(remaining);
        }
        if let Some(reset) = header("x-ratelimit-reset") {
            state.reset_at = Some(reset);
        }
    }

    pub fn remaining(&self) -> Option<u64> {
        self.state.lock().unwrap().remaining
    }
}

#[derive(Clone)]
pub struct GithubConfig {
    pub base_url: String,
    pub token: Option<String>,
    pub timeout: Duration,
    /// Retries on network faults and 5xx responses.
    pub retries: usize,
    pub retry_backoff: Duration,
    /// Longest sleep accepted while waiting for a rate-limit reset.
    pub max_rate_wait: Duration,
    pub sleeper: Arc<dyn Fn(Duration) + Send + Sync>,
}

impl Default for GithubConfig {
    fn default() -> Self {
        Self {
            base_url: DEFAULT_API_URL.to_string(),
            token: None,
            timeout: Duration::from_secs(30),
            retries: 3,
            retry_backoff: Duration::from_secs(1),
            max_rate_wait: Duration::from_secs(3600),
            sleeper: Arc::new(thread::sleep),
        }
    }
}

impl fmt::Debug for GithubConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GithubConfig")
            .field("base_url", &self.base_url)
            .field("token", &self.token.as_ref().map(|_| "<redacted>"))
            .field("timeout", &self.timeout)
            .field("retries", &self.retries)
            .finish()
    }
}

static NEXT_LINK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"<([^>]+)>\s*;\s*rel="next""#).unwrap());

/// Target of the `rel="next"` entry of a `Link` header.
pub fn next_link(header: &str) -> Option<String> {
    NEXT_LINK.captures(header).map(|c| c[1].to_string())
}

pub struct GithubClient {
    base_url: String,
    token: Option<String>,
    agent: ureq::Agent,
    retries: usize,
    retry_backoff: Duration,
    sleeper: Arc<dyn Fn(Duration) + Send + Sync>,
    budget: RateBudget,
}

impl fmt::Debug for GithubClient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GithubClient")
            .field("base_url", &self.base_url)
            .field("budget", &self.budget)
            .finish_non_exhaustive()
    }
}

impl GithubClient {
    pub fn new(config: GithubConfig) -> Self {
        Self {
            base_url: config.base_url.trim_end_matches('/').to_string(),
            token: config.token,
            agent: ureq::AgentBuilder::new().timeout(config.timeout).build(),
            retries: config.retries,
            retry_backoff: config.retry_backoff,
            budget: RateBudget::new(config.max_rate_wait, Arc::clone(&config.sleeper)),
            sleeper: config.sleeper,
        }
    }

    pub fn budget(&self) -> &RateBudget {
        &self.budget
    }

    fn get(&self, url: &str, accept: &str, cursor: &ResumeCursor) -> Result<ureq::Response, IngestError> {
        let mut failures = 0;
        let mut rate_limited = 0;
        loop {
            self.budget.acquire(cursor)?;
            let mut req = self
                .agent
                .get(url)
                .set("Accept", accept)
                .set("User-Agent", "prsum");
            if let Some(token) = &self.token {
                req = req.set("Authorization", &format!("Bearer {token}"));
            }
            let message = match req.call() {
                Ok(resp) => {
                    self.budget.observe(&resp);
                    return Ok(resp);
                }
                Err(ureq::Error::Status(status, resp)) => {
                    self.budget.observe(&resp);
                    let exhausted = resp.header("x-ratelimit-remaining").map(str::trim) == Some("0");
                    match status {
                        403 | 429 if exhausted => {
                            rate_limited += 1;
                            if rate_limited > self.retries + 1 {
                                let reset_at = resp
                                    .header("x-ratelimit-reset")
                                    .and_then(|v| v.parse().ok())
                                    .unwrap_or(0);
                                return Err(IngestError::RateLimited {
                                    cursor: cursor.clone(),
                                    reset_at,
                                });
                            }
                            continue;
                        }
                        401 | 403 => return Err(IngestError::Auth { status }),
                        404 => return Err(IngestError::NotFound { url: url.to_string() }),
                        s if s >= 500 => format!("HTTP {s}"),
                        s => {
                            return Err(IngestError::Http {
                                status: s,
                                url: url.to_string(),
                            })
                        }
                    }
                }
                Err(ureq::Error::Transport(t)) => t.to_string(),
            };
            failures += 1;
            if failures > self.retries {
                return Err(IngestError::Network {
                    cursor: cursor.clone(),
                    message,
                });
            }
            warn!("GET {url} failed ({message}); retry {failures}/{}", self.retries);
            (self.sleeper)(self.retry_backoff * failures as u32);
        }
    }

    fn get_json_pages<T: for<'de> Deserialize<'de>>(
        &self,
        first_url: String,
        page_limit: usize,
        repo: &RepoRef,
        pr: Option<u64>,
    ) -> Result<Vec<T>, IngestError> {
        let mut items = Vec::new();
        let mut url = Some(first_url);
        let mut pages = 0;
        while let Some(current) = url.take() {
            if pages >= page_limit {
                debug!("page limit {page_limit} reached for {}", repo.full_name());
                break;
            }
            pages += 1;
            let cursor = ResumeCursor {
                repo: repo.full_name(),
                pr,
                url: current.clone(),
            };
            let resp = self.get(&current, "application/vnd.github+json", &cursor)?;
            url = resp.header("link").and_then(next_link);
            let page: Vec<T> = resp.into_json().map_err(|e| IngestError::Decode {
                url: current.clone(),
                message: e.to_string(),
            })?;
            items.extend(page);
        }
        Ok(items)
    }

    /// Closed PRs whose merge timestamp is set, following pagination for up
    /// to `page_limit` pages.
    pub fn list_merged_prs(&self, repo: &RepoRef, page_limit: usize) -> Result<Vec<RawPullRequest>, IngestError> {
        let url = format!(
            "{}/repos/{}/{}/pulls?state=closed&per_page={PER_PAGE}",
            self.base_url, repo.owner, repo.name
        );
        let pulls: Vec<PullJson> = self.get_json_pages(url, page_limit, repo, None)?;
        Ok(pulls
            .into_iter()
            .filter(|p| p.merged_at.is_some())
            .map(|p| RawPullRequest {
                repo: repo.clone(),
                number: p.number,
                title: p.title.unwrap_or_default(),
                body: p.body.unwrap_or_default(),
                merged: true,
                commit_shas: Vec::new(),
            })
            .collect())
    }

    /// `(sha, message)` for each commit of a merged PR, in commit order.
    pub fn fetch_commit_list(&self, pr: &RawPullRequest) -> Result<Vec<(String, String)>, IngestError> {
        if !pr.merged {
            return Err(IngestError::NotMerged(pr.record_id()));
        }
        let url = format!(
            "{}/repos/{}/{}/pulls/{}/commits?per_page={PER_PAGE}",
            self.base_url, pr.repo.owner, pr.repo.name, pr.number
        );
        let commits: Vec<CommitJson> = self.get_json_pages(url, usize::MAX, &pr.repo, Some(pr.number))?;
        Ok(commits.into_iter().map(|c| (c.sha, c.commit.message)).collect())
    }

    /// Commit messages of a merged PR in commit order; blank messages dropped.
    pub fn fetch_pr_commits(&self, pr: &RawPullRequest) -> Result<Vec<String>, IngestError> {
        Ok(self
            .fetch_commit_list(pr)?
            .into_iter()
            .map(|(_, m)| m)
            .filter(|m| !m.trim().is_empty())
            .collect())
    }

    /// Unified diff of a PR.
    pub fn fetch_pr_diff(&self, pr: &RawPullRequest) -> Result<String, IngestError> {
        let url = format!(
            "{}/repos/{}/{}/pulls/{}",
            self.base_url, pr.repo.owner, pr.repo.name, pr.number
        );
        let cursor = ResumeCursor {
            repo: pr.repo.full_name(),
            pr: Some(pr.number),
            url: url.clone(),
        };
        self.get(&url, "application/vnd.github.diff", &cursor)?
            .into_string()
            .map_err(|e| IngestError::Decode {
                url,
                message: e.to_string(),
            })
    }

    fn collect_one(&self, pr: &RawPullRequest) -> Result<PullRequestRecord, IngestError> {
        let commits = self.fetch_commit_list(pr)?;
        let mut pr = pr.clone();
        pr.commit_shas = commits.iter().map(|(sha, _)| sha.clone()).collect();
        let messages: Vec<String> = commits
            .into_iter()
            .map(|(_, m)| m)
            .filter(|m| !m.trim().is_empty())
            .collect();
        let diff = self.fetch_pr_diff(&pr)?;
        let extraction = extract_code_comments(&diff);
        if extraction.skipped_hunks > 0 {
            warn!("{}: skipped {} unparseable hunks", pr.record_id(), extraction.skipped_hunks);
        }
        assemble_record(&pr, messages, extraction.comments)
    }

    /// Crawls every repository in order. PR details are fetched by up to
    /// `jobs` workers sharing this client's rate budget; output order is
    /// repository order, then listing order.
    pub fn ingest(&self, repos: &[RepoRef], page_limit: usize, jobs: usize) -> IngestReport {
        let mut report = IngestReport::default();
        for repo in repos {
            let prs = match self.list_merged_prs(repo, page_limit) {
                Ok(prs) => prs,
                Err(e) if e.is_fatal() => {
                    report.aborted = Some(e);
                    return report;
                }
                Err(e) => {
                    report.failures.push((repo.full_name(), e));
                    continue;
                }
            };
            info!("{}: {} merged PRs", repo.full_name(), prs.len());
            let next = AtomicUsize::new(0);
            let results: Mutex<Vec<Option<Result<PullRequestRecord, IngestError>>>> =
                Mutex::new((0..prs.len()).map(|_| None).collect());
            let stop = std::sync::atomic::AtomicBool::new(false);
            thread::scope(|scope| {
                for _ in 0..jobs.max(1).min(prs.len().max(1)) {
                    scope.spawn(|| loop {
                        if stop.load(Ordering::Relaxed) {
                            break;
                        }
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        let Some(pr) = prs.get(i) else { break };
                        let result = self.collect_one(pr);
                        if result.as_ref().is_err_and(IngestError::is_fatal) {
                            stop.store(true, Ordering::Relaxed);
                        }
                        results.lock().unwrap()[i] = Some(result);
                    });
                }
            });
            for (pr, result) in prs.iter().zip(results.into_inner().unwrap()) {
                match result {
                    Some(Ok(record)) => report.records.push(record),
                    Some(Err(e)) if e.is_fatal() => {
                        if report.aborted.is_none() {
                            report.aborted = Some(e);
                        }
                    }
                    Some(Err(e)) => report.failures.push((pr.record_id(), e)),
                    None => {}
                }
            }
            if report.aborted.is_some() {
                return report;
            }
        }
        report
    }
}

#[derive(Debug, Default)]
pub struct IngestReport {
    pub records: Vec<PullRequestRecord>,
    /// Per-repository or per-PR failures that did not stop the crawl.
    pub failures: Vec<(String, IngestError)>,
    /// Set when authentication or the rate budget stopped the crawl.
    pub aborted: Option<IngestError>,
}

/// Builds a corpus record; the PR body is cleaned into the description.
pub fn assemble_record(
    pr: &RawPullRequest,
    messages: Vec<String>,
    comments: Vec<String>,
) -> Result<PullRequestRecord, IngestError> {
    if messages.is_empty() {
        return Err(IngestError::NoCommits(pr.record_id()));
    }
    Ok(PullRequestRecord {
        id: pr.record_id(),
        description: clean_text(&pr.body, &CleaningConfig::default()),
        commit_messages: messages,
        code_comments: comments,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CommentExtraction {
    pub comments: Vec<String>,
    pub skipped_hunks: usize,
}

static HUNK_HEADER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^@@ -\d+(?:,(\d+))? \+\d+(?:,(\d+))? @@").unwrap());

fn tidy_comment(pieces: &[String]) -> Option<String> {
    let text = pieces
        .iter()
        .map(|p| p.trim().trim_start_matches('*').trim())
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(" ");
    let text = text.split_whitespace().collect::<Vec<_>>().join(" ");
    (!text.is_empty()).then_some(text)
}

#[derive(Default)]
struct CommentScanner {
    block: Option<Vec<String>>,
}

impl CommentScanner {
    fn added_line(&mut self, line: &str, out: &mut Vec<String>) {
        let bytes = line.as_bytes();
        let mut i = 0;
        let mut quote: Option<u8> = None;
        while i < bytes.len() {
            if let Some(block) = self.block.as_mut() {
                match line[i..].find("*/") {
                    Some(end) => {
                        block.push(line[i..i + end].to_string());
                        let pieces = self.block.take().unwrap();
                        out.extend(tidy_comment(&pieces));
                        i += end + 2;
                        continue;
                    }
                    None => {
                        block.push(line[i..].to_string());
                        return;
                    }
                }
            }
            let b = bytes[i];
            if let Some(q) = quote {
                if b == b'\\' {
                    i += 1;
                } else if b == q {
                    quote = None;
                }
            } else if line[i..].starts_with("//") {
                let rest = line[i..].trim_start_matches('/');
                out.extend(tidy_comment(&[rest.to_string()]));
                return;
            } else if line[i..].starts_with("/*") {
                self.block = Some(Vec::new());
                i += 2;
                continue;
            } else if b == b'"' || b == b'\'' {
                quote = Some(b);
            }
            i += 1;
        }
        if let Some(block) = self.block.as_mut() {
            block.push(String::new());
        }
    }

    /// A non-added line ends any open block comment; what was collected is kept.
    fn interrupt(&mut self, out: &mut Vec<String>) {
        if let Some(pieces) = self.block.take() {
            out.extend(tidy_comment(&pieces));
        }
    }
}

/// `//` and `/* … */` comments from added diff lines only, markers stripped,
/// in diff order. Block comments may span consecutive added lines.
pub fn extract_code_comments(diff: &str) -> CommentExtraction {
    let mut result = CommentExtraction::default();
    let mut scanner = CommentScanner::default();
    let mut remaining: Option<(usize, usize)> = None;
    for line in diff.lines() {
        if let Some((old, new)) = remaining.as_mut() {
            match line.as_bytes().first() {
                Some(b'+') if *new > 0 => {
                    scanner.added_line(&line[1..], &mut result.comments);
                    *new -= 1;
                }
                Some(b'-') if *old > 0 => {
                    scanner.interrupt(&mut result.comments);
                    *old -= 1;
                }
                Some(b' ') | None if *old > 0 && *new > 0 => {
                    scanner.interrupt(&mut result.comments);
                    *old -= 1;
                    *new -= 1;
                }
                Some(b'\\') => {}
                _ => {
                    scanner.interrupt(&mut result.comments);
                    result.skipped_hunks += 1;
                    remaining = None;
                }
            }
            if remaining.is_some_and(|(o, n)| o == 0 && n == 0) {
                scanner.interrupt(&mut result.comments);
                remaining = None;
            }
            continue;
        }
        if line.starts_with("@@") {
            match HUNK_HEADER.captures(line) {
                Some(c) => {
                    let count = |i: usize| c.get(i).map_or(Some(1), |m| m.as_str().parse().ok());
                    match (count(1), count(2)) {
                        (Some(old), Some(new)) if old + new > 0 => remaining = Some((old, new)),
                        (Some(_), Some(_)) => {}
                        _ => result.skipped_hunks += 1,
                    }
                }
                None => result.skipped_hunks += 1,
            }
        }
    }
    scanner.interrupt(&mut result.comments);
    result
}
