#include "hallulens/corpus.hpp"

#include "hallulens/tokenize.hpp"
#include "hallulens/util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace hallulens::corpus {

using nlohmann::json;

PageStore::PageStore(std::vector<WikiPage> pages) : pages_(std::move(pages)) {
    rebuild_index();
}

void PageStore::rebuild_index() {
    by_id_.clear();
    by_id_.reserve(pages_.size());
    for (std::size_t i = 0; i < pages_.size(); ++i) by_id_[pages_[i].page_id] = i;
}

const WikiPage* PageStore::find(const std::string& page_id) const {
    auto it = by_id_.find(page_id);
    return it == by_id_.end() ? nullptr : &pages_[it->second];
}

const WikiPage& PageStore::at(const std::string& page_id) const {
    const WikiPage* p = find(page_id);
    if (!p) throw std::runtime_error("unknown page_id: " + page_id);
    return *p;
}

bool PageStore::bins_assigned() const {
    return !pages_.empty() &&
           std::all_of(pages_.begin(), pages_.end(), [](const WikiPage& p) { return p.difficulty_bin >= 0; });
}

namespace {

// PageStore cache format: magic + version, then length-prefixed fields in
// archive order. Loading rejects unknown magic/version so stale caches fail fast.
constexpr char kStoreMagic[8] = {'H', 'L', 'P', 'S', 'T', 'O', 'R', 'E'};
constexpr std::uint32_t kStoreVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_str(std::string& out, const std::string& s) {
    put_u64(out, s.size());
    out += s;
}

class Reader {
public:
    explicit Reader(std::string data) : data_(std::move(data)) {}
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::string str() {
        std::uint64_t n = u64();
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::string raw(std::size_t n) {
        need(n);
        std::string s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }

private:
    void need(std::uint64_t n) {
        if (pos_ + n > data_.size()) throw std::runtime_error("page store cache truncated");
    }
    std::string data_;
    std::size_t pos_ = 0;
};

}  // namespace

void PageStore::save(const std::filesystem::path& path) const {
    std::string out;
    out.append(kStoreMagic, sizeof(kStoreMagic));
    put_u32(out, kStoreVersion);
    put_u64(out, pages_.size());
    for (const WikiPage& p : pages_) {
        put_str(out, p.page_id);
        put_str(out, p.title);
        put_str(out, p.body);
        static_assert(sizeof(double) == 8);
        std::uint64_t bits;
        std::memcpy(&bits, &p.harmonic_centrality, 8);
        put_u64(out, bits);
        put_u32(out, static_cast<std::uint32_t>(p.difficulty_bin + 1));  // 0 = unassigned
        out.push_back(p.centrality_missing ? 1 : 0);
    }
    write_file_atomic(path, out);
}

PageStore PageStore::load(const std::filesystem::path& path) {
    Reader r(read_file(path));
    if (r.raw(sizeof(kStoreMagic)) != std::string(kStoreMagic, sizeof(kStoreMagic)))
        throw std::runtime_error("not a page store cache: " + path.string());
    if (r.u32() != kStoreVersion)
        throw std::runtime_error("stale page store cache (version mismatch): " + path.string());
    std::uint64_t n = r.u64();
    std::vector<WikiPage> pages;
    pages.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) {
        WikiPage p;
        p.page_id = r.str();
        p.title = r.str();
        p.body = r.str();
        std::uint64_t bits = r.u64();
        std::memcpy(&p.harmonic_centrality, &bits, 8);
        p.difficulty_bin = static_cast<int>(r.u32()) - 1;
        p.centrality_missing = r.raw(1)[0] != 0;
        pages.push_back(std::move(p));
    }
    return PageStore(std::move(pages));
}

PageStore ingest_corpus(const std::filesystem::path& archive_path,
                        const std::filesystem::path& centrality_path) {
    // Centrality table: two columns separated by tab or comma, keyed by page_id
    // or title. A header row is tolerated.
    std::unordered_map<std::string, double> scores;
    for (const std::string& line : read_lines(centrality_path)) {
        if (line.empty()) continue;
        char sep = line.find('\t') != std::string::npos ? '\t' : ',';
        auto cols = split(line, sep);
        if (cols.size() < 2) continue;
        try {
            scores[trim(cols[0])] = std::stod(trim(cols[1]));
        } catch (const std::exception&) {
            continue;  // header or malformed row
        }
    }

    std::ifstream in(archive_path);
    if (!in) throw std::runtime_error("unreadable archive: " + archive_path.string());
    std::vector<WikiPage> pages;
    std::unordered_map<std::string, int> id_count;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        json rec;
        try {
            rec = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error("unreadable archive record at line " + std::to_string(lineno) + ": " +
                                     e.what());
        }
        WikiPage p;
        if (rec.contains("pageid")) {
            p.page_id = rec["pageid"].is_string() ? rec["pageid"].get<std::string>()
                                                  : std::to_string(rec["pageid"].get<std::int64_t>());
        } else {
            throw std::runtime_error("archive record missing pageid at line " + std::to_string(lineno));
        }
        p.title = rec.value("title", "");
        p.body = rec.value("markdown", "");
        ++id_count[p.page_id];
        pages.push_back(std::move(p));
    }

    std::vector<std::string> dups;
    for (const auto& [id, n] : id_count)
        if (n > 1) dups.push_back(id);
    if (!dups.empty()) {
        std::sort(dups.begin(), dups.end());
        throw std::runtime_error("duplicate page_id in archive: " + join(dups, ", "));
    }

    for (WikiPage& p : pages) {
        auto it = scores.find(p.page_id);
        if (it == scores.end()) it = scores.find(p.title);
        if (it == scores.end()) {
            p.harmonic_centrality = 0.0;  // hardest; kept, never dropped
            p.centrality_missing = true;
        } else {
            p.harmonic_centrality = it->second;
        }
    }
    return PageStore(std::move(pages));
}

void assign_bins(PageStore& store, int n_bins) {
    auto& pages = store.mutable_pages();
    if (n_bins <= 0) throw std::invalid_argument("assign_bins: n_bins must be positive");
    if (static_cast<std::size_t>(n_bins) > pages.size())
        throw std::invalid_argument("assign_bins: n_bins exceeds page count");
    std::vector<std::size_t> order(pages.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (pages[a].harmonic_centrality != pages[b].harmonic_centrality)
            return pages[a].harmonic_centrality < pages[b].harmonic_centrality;
        return pages[a].page_id < pages[b].page_id;
    });
    // floor(rank * n_bins / n) keeps bin sizes within one of each other and
    // monotone in centrality.
    const std::size_t n = pages.size();
    for (std::size_t rank = 0; rank < n; ++rank) {
        pages[order[rank]].difficulty_bin =
            static_cast<int>(rank * static_cast<std::size_t>(n_bins) / n);
    }
}

std::vector<Section> split_sections(const WikiPage& page) {
    std::vector<Section> sections;
    if (page.body.empty()) return sections;

    Section current;
    std::string text;
    std::size_t line_start = 0;
    bool any = false;
    auto flush = [&] {
        current.text = text;
        if (!trim(current.text).empty() || !current.heading.empty()) sections.push_back(current);
        text.clear();
    };
    const std::string& body = page.body;
    for (std::size_t i = 0; i <= body.size(); ++i) {
        if (i != body.size() && body[i] != '\n') continue;
        std::string_view line(body.data() + line_start, i - line_start);
        std::string_view stripped = line;
        while (!stripped.empty() && (stripped.front() == ' ' || stripped.front() == '\t'))
            stripped.remove_prefix(1);
        if (stripped.size() >= 2 && stripped[0] == '#') {
            std::size_t level = 0;
            while (level < stripped.size() && stripped[level] == '#') ++level;
            if (level < stripped.size() && stripped[level] == ' ') {
                if (any) flush();
                any = true;
                current = Section{};
                current.heading = trim(stripped.substr(level));
                current.char_offset = line_start;
                line_start = i + 1;
                continue;
            }
        }
        if (!any) {
            any = true;
            current = Section{};
            current.heading = "";
            current.char_offset = 0;
        }
        text.append(line);
        text.push_back('\n');
        line_start = i + 1;
    }
    flush();
    return sections;
}

std::vector<Passage> chunk_passages(const WikiPage& page, std::size_t max_tokens) {
    if (max_tokens < 1) throw std::invalid_argument("chunk_passages: max_tokens must be >= 1");
    std::vector<Passage> passages;
    std::vector<std::string> tokens = whitespace_tokens(page.body);
    std::size_t idx = 0;
    for (std::size_t start = 0; start < tokens.size(); start += max_tokens) {
        std::size_t count = std::min(max_tokens, tokens.size() - start);
        Passage p;
        p.page_id = page.page_id;
        p.page_title = page.title;
        p.passage_index = idx++;
        p.token_count = count;
        std::string text;
        for (std::size_t i = 0; i < count; ++i) {
            if (i) text.push_back(' ');
            text += tokens[start + i];
        }
        p.text = std::move(text);
        passages.push_back(std::move(p));
    }
    return passages;
}

std::vector<const WikiPage*> scope_pages(const std::vector<std::string>& entities,
                                         const PageStore& store,
                                         const std::string& seed_page_id,
                                         std::size_t cap) {
    const WikiPage& seed = store.at(seed_page_id);
    std::vector<const WikiPage*> out{&seed};
    for (const WikiPage& p : store.pages()) {
        if (out.size() >= cap) break;
        if (p.page_id == seed.page_id) continue;
        for (const std::string& e : entities) {
            if (!trim(e).empty() && icontains(p.title, trim(e))) {
                out.push_back(&p);
                break;
            }
        }
    }
    return out;
}

}  // namespace hallulens::corpus
