#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace hallulens::corpus {

struct Section {
    std::string heading;   // "" for preamble / heading-free pages
    std::string text;
    std::size_t char_offset = 0;
};

struct WikiPage {
    std::string page_id;
    std::string title;
    std::string body;                 // markdown
    double harmonic_centrality = 0.0;
    int difficulty_bin = -1;          // -1 until assign_bins has run; 0 = hardest
    bool centrality_missing = false;  // score defaulted to 0, page kept
};

struct Passage {
    std::string page_id;
    std::string page_title;
    std::size_t passage_index = 0;
    std::string text;
    std::size_t token_count = 0;  // whitespace tokens, <= chunk limit
};

// Build-once page collection. Pages keep archive order; lookups by page_id.
class PageStore {
public:
    PageStore() = default;
    explicit PageStore(std::vector<WikiPage> pages);

    const std::vector<WikiPage>& pages() const { return pages_; }
    std::vector<WikiPage>& mutable_pages() { return pages_; }
    std::size_t size() const { return pages_.size(); }
    const WikiPage* find(const std::string& page_id) const;
    const WikiPage& at(const std::string& page_id) const;  // throws if absent
    bool bins_assigned() const;

    void save(const std::filesystem::path& path) const;
    static PageStore load(const std::filesystem::path& path);

private:
    void rebuild_index();
    std::vector<WikiPage> pages_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

// Reads a GoodWiki-style newline-delimited archive ({pageid,title,markdown}
// JSON records) plus a two-column centrality table (page<TAB or ,>score keyed
// by page_id or title). Pages missing a score get 0 and a flag. Duplicate
// page ids are a hard error listing the duplicates.
PageStore ingest_corpus(const std::filesystem::path& archive_path,
                        const std::filesystem::path& centrality_path);

// Equal-frequency bins over ascending centrality, bin 0 = lowest decile
// (hardest). Ties broken by page_id. Bin sizes differ by at most one.
void assign_bins(PageStore& store, int n_bins = 10);

std::vector<Section> split_sections(const WikiPage& page);

inline constexpr std::size_t kPassageTokenLimit = 256;
std::vector<Passage> chunk_passages(const WikiPage& page, std::size_t max_tokens = kPassageTokenLimit);

// {seed page} plus pages whose title contains any entity (case-insensitive
// substring), deduplicated, capped. Throws on unknown seed id.
std::vector<const WikiPage*> scope_pages(const std::vector<std::string>& entities,
                                         const PageStore& store,
                                         const std::string& seed_page_id,
                                         std::size_t cap = 50);

}  // namespace hallulens::corpus
