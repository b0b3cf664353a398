#include "manifestd/transparency_log.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>
#include <deque>
#include <fstream>
#include <mutex>
#include <shared_mutex>
#include <sstream>

#include "manifestd/error.hpp"

namespace manifestd::tlog {

namespace {

constexpr std::uint8_t kEntryVersion = 1;
constexpr std::uint8_t kLeafPrefix = 0x00;
constexpr std::uint8_t kNodePrefix = 0x01;

void put_be(Bytes& out, std::uint64_t v, int width) {
    for (int i = width - 1; i >= 0; --i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_be(std::span<const std::uint8_t> in, std::size_t& pos, int width) {
    if (in.size() - pos < static_cast<std::size_t>(width)) throw EncodingError("entry truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) v = (v << 8) | in[pos++];
    return v;
}

std::uint64_t largest_power_below(std::uint64_t n) { return std::bit_floor(n - 1); }

std::string errno_text() { return std::strerror(errno); }

bool write_all(int fd, const std::uint8_t* data, std::size_t n) {
    while (n > 0) {
        const ssize_t w = ::write(fd, data, n);
        if (w < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
    return true;
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot read " + path.string());
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

Bytes encode_entry(const LogEntry& e) {
    if (e.key_id.size() > 0xffff || e.signature.size() > 0xffff) throw EncodingError("entry field too long");
    Bytes out;
    out.reserve(1 + 8 + 8 + 32 + 2 + e.key_id.size() + 2 + e.signature.size());
    out.push_back(kEntryVersion);
    put_be(out, e.index, 8);
    put_be(out, e.appended_at, 8);
    out.insert(out.end(), e.manifest_digest.bytes.begin(), e.manifest_digest.bytes.end());
    put_be(out, e.key_id.size(), 2);
    out.insert(out.end(), e.key_id.begin(), e.key_id.end());
    put_be(out, e.signature.size(), 2);
    out.insert(out.end(), e.signature.begin(), e.signature.end());
    return out;
}

LogEntry decode_entry(std::span<const std::uint8_t> body) {
    std::size_t pos = 0;
    if (get_be(body, pos, 1) != kEntryVersion) throw EncodingError("unknown entry version");
    LogEntry e;
    e.index = get_be(body, pos, 8);
    e.appended_at = get_be(body, pos, 8);
    if (body.size() - pos < 32) throw EncodingError("entry truncated");
    std::copy_n(body.begin() + static_cast<std::ptrdiff_t>(pos), 32, e.manifest_digest.bytes.begin());
    pos += 32;
    const auto key_len = get_be(body, pos, 2);
    if (body.size() - pos < key_len) throw EncodingError("entry truncated");
    e.key_id.assign(reinterpret_cast<const char*>(body.data() + pos), key_len);
    pos += key_len;
    const auto sig_len = get_be(body, pos, 2);
    if (body.size() - pos != sig_len) throw EncodingError("entry length mismatch");
    e.signature.assign(body.begin() + static_cast<std::ptrdiff_t>(pos), body.end());
    return e;
}

Digest32 leaf_hash(std::span<const std::uint8_t> data) {
    Sha256 h;
    h.update(kLeafPrefix).update(data);
    return h.finish();
}

Digest32 node_hash(const Digest32& left, const Digest32& right) {
    std::array<std::uint8_t, 65> buf;
    buf[0] = kNodePrefix;
    std::copy(left.bytes.begin(), left.bytes.end(), buf.begin() + 1);
    std::copy(right.bytes.begin(), right.bytes.end(), buf.begin() + 33);
    return sha256(buf);
}

Digest32 empty_root() {
    static const Digest32 root = sha256(std::string_view{});
    return root;
}

Digest32 chain_step(const Digest32& previous_root, const ManifestDigest& digest) {
    std::array<std::uint8_t, 64> buf;
    std::copy(previous_root.bytes.begin(), previous_root.bytes.end(), buf.begin());
    std::copy(digest.bytes.begin(), digest.bytes.end(), buf.begin() + 32);
    return sha256(buf);
}

// MerkleTree -----------------------------------------------------------------

Digest32 MerkleTree::hash_node(const Digest32& l, const Digest32& r) const {
    count_hash_ops(1);
    return node_hash(l, r);
}

void MerkleTree::append_leaf(const Digest32& leaf) {
    if (levels_.empty()) levels_.emplace_back();
    levels_[0].push_back(leaf);
    std::uint64_t idx = levels_[0].size() - 1;
    std::size_t level = 0;
    while (idx & 1) {
        if (levels_.size() <= level + 1) levels_.emplace_back();
        const auto& row = levels_[level];
        levels_[level + 1].push_back(hash_node(row[idx - 1], row[idx]));
        idx >>= 1;
        ++level;
    }
}

Digest32 MerkleTree::subtree(std::uint64_t begin, std::uint64_t end) const {
    const std::uint64_t len = end - begin;
    if (std::has_single_bit(len) && begin % len == 0) {
        return levels_[std::countr_zero(len)][begin >> std::countr_zero(len)];
    }
    const std::uint64_t k = largest_power_below(len);
    return hash_node(subtree(begin, begin + k), subtree(begin + k, end));
}

MerkleRoot MerkleTree::root_at(std::uint64_t tree_size) const {
    if (tree_size > size()) throw OutOfRange("tree size beyond log size");
    if (tree_size == 0) return MerkleRoot{empty_root(), 0};
    // Perfect subtrees of the binary decomposition, folded right to left.
    std::optional<Digest32> acc;
    for (int bit = 0; bit < 64; ++bit) {
        const std::uint64_t span = std::uint64_t{1} << bit;
        if ((tree_size & span) == 0) continue;
        const std::uint64_t begin = tree_size & ~((span << 1) - 1);
        const Digest32& node = levels_[bit][begin >> bit];
        acc = acc ? hash_node(node, *acc) : node;
    }
    return MerkleRoot{*acc, tree_size};
}

void MerkleTree::path(std::uint64_t index, std::uint64_t begin, std::uint64_t end,
                      std::vector<ProofStep>& out) const {
    if (end - begin == 1) return;
    const std::uint64_t k = largest_power_below(end - begin);
    if (index < begin + k) {
        path(index, begin, begin + k, out);
        out.push_back({subtree(begin + k, end), Side::right});
    } else {
        path(index, begin + k, end, out);
        out.push_back({subtree(begin, begin + k), Side::left});
    }
}

MerkleProof MerkleTree::prove_inclusion(std::uint64_t index, std::uint64_t tree_size) const {
    if (!(index < tree_size && tree_size <= size())) {
        throw OutOfRange("inclusion proof needs index < tree_size <= log size");
    }
    MerkleProof proof{index, tree_size, {}};
    path(index, 0, tree_size, proof.path);
    return proof;
}

void MerkleTree::subproof(std::uint64_t m, std::uint64_t begin, std::uint64_t end, bool complete,
                          std::vector<Digest32>& out) const {
    if (m == end) {
        if (!complete) out.push_back(subtree(begin, end));
        return;
    }
    const std::uint64_t k = largest_power_below(end - begin);
    if (m <= begin + k) {
        subproof(m, begin, begin + k, complete, out);
        out.push_back(subtree(begin + k, end));
    } else {
        subproof(m, begin + k, end, false, out);
        out.push_back(subtree(begin, begin + k));
    }
}

ConsistencyProof MerkleTree::prove_consistency(std::uint64_t old_size, std::uint64_t new_size) const {
    if (!(0 < old_size && old_size <= new_size && new_size <= size())) {
        throw OutOfRange("consistency proof needs 0 < old_size <= new_size <= log size");
    }
    ConsistencyProof proof{old_size, new_size, {}};
    if (old_size < new_size) subproof(old_size, 0, new_size, true, proof.path);
    return proof;
}

std::uint64_t audit_path_length(std::uint64_t leaf_index, std::uint64_t tree_size) {
    if (leaf_index >= tree_size) throw OutOfRange("leaf index beyond tree size");
    std::uint64_t length = 0;
    std::uint64_t index = leaf_index;
    std::uint64_t last = tree_size - 1;
    while (last != 0) {
        if ((index % 2 != 0) || index != last) ++length;
        index /= 2;
        last /= 2;
    }
    return length;
}

bool verify_inclusion(const Digest32& leaf, const MerkleProof& proof, const MerkleRoot& root) {
    if (proof.tree_size != root.tree_size || proof.leaf_index >= proof.tree_size) return false;
    std::uint64_t fn = proof.leaf_index;
    std::uint64_t sn = proof.tree_size - 1;
    Digest32 r = leaf;
    for (const ProofStep& step : proof.path) {
        if (sn == 0) return false;
        if ((fn & 1) || fn == sn) {
            if (step.side != Side::left) return false;
            r = node_hash(step.sibling, r);
            if (!(fn & 1)) {
                while (!(fn & 1) && fn != 0) {
                    fn >>= 1;
                    sn >>= 1;
                }
            }
        } else {
            if (step.side != Side::right) return false;
            r = node_hash(r, step.sibling);
        }
        fn >>= 1;
        sn >>= 1;
    }
    return sn == 0 && r == root.hash;
}

bool verify_consistency(const ConsistencyProof& proof, const MerkleRoot& old_root, const MerkleRoot& new_root) {
    if (proof.old_size != old_root.tree_size || proof.new_size != new_root.tree_size) return false;
    if (proof.old_size == 0 || proof.old_size > proof.new_size) return false;
    if (proof.old_size == proof.new_size) return proof.path.empty() && old_root.hash == new_root.hash;

    std::vector<Digest32> path = proof.path;
    if (std::has_single_bit(proof.old_size)) path.insert(path.begin(), old_root.hash);
    if (path.empty()) return false;

    std::uint64_t fn = proof.old_size - 1;
    std::uint64_t sn = proof.new_size - 1;
    while (fn & 1) {
        fn >>= 1;
        sn >>= 1;
    }
    Digest32 fr = path[0];
    Digest32 sr = path[0];
    for (std::size_t i = 1; i < path.size(); ++i) {
        const Digest32& c = path[i];
        if (sn == 0) return false;
        if ((fn & 1) || fn == sn) {
            fr = node_hash(c, fr);
            sr = node_hash(c, sr);
            if (!(fn & 1)) {
                while (!(fn & 1) && fn != 0) {
                    fn >>= 1;
                    sn >>= 1;
                }
            }
        } else {
            sr = node_hash(sr, c);
        }
        fn >>= 1;
        sn >>= 1;
    }
    return fr == old_root.hash && sr == new_root.hash && sn == 0;
}

Digest32 rebuild_root(std::span<const Digest32> leaves, std::uint64_t* hash_ops) {
    if (leaves.empty()) return empty_root();
    if (leaves.size() == 1) return leaves[0];
    const std::size_t k = largest_power_below(leaves.size());
    const Digest32 l = rebuild_root(leaves.first(k), hash_ops);
    const Digest32 r = rebuild_root(leaves.subspan(k), hash_ops);
    if (hash_ops) ++*hash_ops;
    return node_hash(l, r);
}

std::string format_checkpoint(const Checkpoint& c) {
    return std::to_string(c.tree_size) + " " + c.root.hex() + " " + c.chain.hex() + "\n";
}

// TransparencyLog --------------------------------------------------------------

struct TransparencyLog::Impl {
    std::optional<std::filesystem::path> dir;
    LogOptions options;
    int log_fd = -1;
    int checkpoint_fd = -1;

    mutable std::shared_mutex mu;
    std::deque<LogEntry> entries;
    std::vector<std::uint64_t> offsets{0};  // offsets[n] = bytes used by first n records
    std::vector<Digest32> chains{Digest32{}};  // chains[n] = chain after n entries
    MerkleTree tree;
    MerkleRoot current{empty_root(), 0};

    ~Impl() {
        if (log_fd >= 0) ::close(log_fd);
        if (checkpoint_fd >= 0) ::close(checkpoint_fd);
    }

    void add(LogEntry entry, std::span<const std::uint8_t> body) {
        tree.count_hash_ops(2);  // leaf + chain
        tree.append_leaf(leaf_hash(body));
        chains.push_back(chain_step(current.hash, entry.manifest_digest));
        offsets.push_back(offsets.back() + 4 + body.size());
        entries.push_back(std::move(entry));
        current = tree.root();
    }
};

TransparencyLog::TransparencyLog() : impl_(std::make_unique<Impl>()) {}
TransparencyLog::~TransparencyLog() = default;
TransparencyLog::TransparencyLog(TransparencyLog&&) noexcept = default;
TransparencyLog& TransparencyLog::operator=(TransparencyLog&&) noexcept = default;

TransparencyLog TransparencyLog::open(const std::filesystem::path& dir, LogOptions options) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw StorageError("cannot create log directory " + dir.string() + ": " + ec.message());
    if (options.checkpoint_interval == 0) options.checkpoint_interval = 1;

    TransparencyLog log;
    Impl& impl = *log.impl_;
    impl.dir = dir;
    impl.options = options;

    const auto log_path = dir / kLogFileName;
    if (std::filesystem::exists(log_path)) {
        const Bytes data = read_file(log_path);
        std::size_t pos = 0;
        while (pos < data.size()) {
            if (data.size() - pos < 4) throw StorageError("log ends inside a length prefix");
            const std::uint32_t len = (std::uint32_t{data[pos]} << 24) | (std::uint32_t{data[pos + 1]} << 16) |
                                      (std::uint32_t{data[pos + 2]} << 8) | std::uint32_t{data[pos + 3]};
            pos += 4;
            if (data.size() - pos < len) throw StorageError("log ends inside a record");
            const std::span<const std::uint8_t> body(data.data() + pos, len);
            LogEntry e;
            try {
                e = decode_entry(body);
            } catch (const EncodingError& err) {
                throw StorageError("corrupt record " + std::to_string(impl.entries.size()) + ": " + err.what());
            }
            if (e.index != impl.entries.size()) {
                throw StorageError("record " + std::to_string(impl.entries.size()) + " has index " +
                                   std::to_string(e.index));
            }
            impl.add(std::move(e), body);
            pos += len;
        }
    }

    impl.log_fd = ::open(log_path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (impl.log_fd < 0) throw StorageError("cannot open " + log_path.string() + ": " + errno_text());
    const auto cp_path = dir / kCheckpointFileName;
    impl.checkpoint_fd = ::open(cp_path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (impl.checkpoint_fd < 0) throw StorageError("cannot open " + cp_path.string() + ": " + errno_text());
    return log;
}

AppendReceipt TransparencyLog::append(const ManifestDigest& digest, std::span<const std::uint8_t> signature,
                                      const std::string& key_id, std::uint64_t appended_at) {
    std::unique_lock lock(impl_->mu);
    Impl& impl = *impl_;
    LogEntry entry{impl.entries.size(), digest, Bytes(signature.begin(), signature.end()), key_id, appended_at};
    const Bytes body = encode_entry(entry);

    if (impl.log_fd >= 0) {
        Bytes record;
        record.reserve(body.size() + 4);
        put_be(record, body.size(), 4);
        record.insert(record.end(), body.begin(), body.end());
        if (!write_all(impl.log_fd, record.data(), record.size()) || (impl.options.fsync && ::fsync(impl.log_fd) != 0)) {
            const std::string why = errno_text();
            // Drop any partial record so the file stays a clean prefix.
            if (::ftruncate(impl.log_fd, static_cast<off_t>(impl.offsets.back())) != 0) {}
            throw StorageError("log append failed: " + why);
        }
    }

    impl.add(std::move(entry), body);
    const std::uint64_t n = impl.entries.size();
    if (impl.checkpoint_fd >= 0 && n % impl.options.checkpoint_interval == 0) {
        const std::string line = format_checkpoint({n, impl.current.hash, impl.chains.back()});
        if (!write_all(impl.checkpoint_fd, reinterpret_cast<const std::uint8_t*>(line.data()), line.size()) ||
            (impl.options.fsync && ::fsync(impl.checkpoint_fd) != 0)) {
            throw StorageError("checkpoint write failed: " + errno_text());
        }
    }
    return AppendReceipt{n - 1, impl.current, impl.chains.back()};
}

std::uint64_t TransparencyLog::size() const {
    std::shared_lock lock(impl_->mu);
    return impl_->entries.size();
}

const LogEntry& TransparencyLog::entry(std::uint64_t index) const {
    std::shared_lock lock(impl_->mu);
    if (index >= impl_->entries.size()) throw OutOfRange("entry index beyond log size");
    return impl_->entries[index];
}

Digest32 TransparencyLog::leaf(std::uint64_t index) const {
    std::shared_lock lock(impl_->mu);
    if (index >= impl_->tree.size()) throw OutOfRange("leaf index beyond log size");
    return impl_->tree.leaf(index);
}

MerkleRoot TransparencyLog::root() const {
    std::shared_lock lock(impl_->mu);
    return impl_->current;
}

MerkleRoot TransparencyLog::root_at(std::uint64_t tree_size) const {
    std::shared_lock lock(impl_->mu);
    return impl_->tree.root_at(tree_size);
}

Digest32 TransparencyLog::chain() const {
    std::shared_lock lock(impl_->mu);
    return impl_->chains.back();
}

Digest32 TransparencyLog::chain_at(std::uint64_t tree_size) const {
    std::shared_lock lock(impl_->mu);
    if (tree_size >= impl_->chains.size()) throw OutOfRange("tree size beyond log size");
    return impl_->chains[tree_size];
}

MerkleProof TransparencyLog::prove_inclusion(std::uint64_t index, std::uint64_t tree_size) const {
    std::shared_lock lock(impl_->mu);
    return impl_->tree.prove_inclusion(index, tree_size);
}

ConsistencyProof TransparencyLog::prove_consistency(std::uint64_t old_size, std::uint64_t new_size) const {
    std::shared_lock lock(impl_->mu);
    return impl_->tree.prove_consistency(old_size, new_size);
}

std::uint64_t TransparencyLog::storage_bytes(std::uint64_t n) const {
    std::shared_lock lock(impl_->mu);
    if (n >= impl_->offsets.size()) throw OutOfRange("size beyond log size");
    return impl_->offsets[n];
}

std::vector<std::pair<std::uint64_t, std::uint64_t>> TransparencyLog::growth_series(
    std::span<const std::uint64_t> checkpoints) const {
    std::vector<std::pair<std::uint64_t, std::uint64_t>> out;
    const std::uint64_t n = size();
    for (std::uint64_t c : checkpoints) {
        if (c == 0 || c > n) continue;
        out.emplace_back(c, storage_bytes(c));
    }
    return out;
}

std::uint64_t TransparencyLog::hash_ops() const {
    std::shared_lock lock(impl_->mu);
    return impl_->tree.hash_ops();
}

const std::optional<std::filesystem::path>& TransparencyLog::directory() const { return impl_->dir; }

std::vector<std::pair<std::uint64_t, std::uint64_t>> log_growth_series(const TransparencyLog& log,
                                                                       std::span<const std::uint64_t> checkpoints) {
    return log.growth_series(checkpoints);
}

// Integrity ------------------------------------------------------------------

namespace {

IntegrityReport tampered(std::uint64_t at, std::uint64_t entries, std::uint64_t checkpoints, std::string why) {
    return IntegrityReport{false, at, entries, checkpoints, std::move(why)};
}

std::optional<Checkpoint> parse_checkpoint_line(std::string_view line) {
    // Exactly "<decimal> <64 hex> <64 hex>", single spaces, lowercase hex.
    const auto sp1 = line.find(' ');
    if (sp1 == std::string_view::npos || sp1 == 0 || line.size() != sp1 + 1 + 64 + 1 + 64) return std::nullopt;
    if (line[sp1 + 65] != ' ') return std::nullopt;
    const std::string_view size_text = line.substr(0, sp1);
    if (size_text.find_first_not_of("0123456789") != std::string_view::npos) return std::nullopt;
    if (size_text.size() > 1 && size_text[0] == '0') return std::nullopt;
    const std::string_view root_hex = line.substr(sp1 + 1, 64);
    const std::string_view chain_hex = line.substr(sp1 + 66, 64);
    Checkpoint c;
    try {
        c.tree_size = std::stoull(std::string(size_text));
        c.root = Digest32::from_hex(root_hex);
        c.chain = Digest32::from_hex(chain_hex);
    } catch (const std::exception&) {
        return std::nullopt;
    }
    if (c.root.hex() != root_hex || c.chain.hex() != chain_hex) return std::nullopt;  // lowercase only
    return c;
}

}  // namespace

IntegrityReport check_integrity(std::span<const std::uint8_t> log_bytes, std::string_view checkpoint_text) {
    // Parse records as far as they stay well-formed.
    std::vector<Digest32> leaves;
    std::vector<ManifestDigest> digests;
    std::optional<std::string> parse_problem;
    std::size_t pos = 0;
    while (pos < log_bytes.size()) {
        const std::uint64_t i = leaves.size();
        if (log_bytes.size() - pos < 4) {
            parse_problem = "record " + std::to_string(i) + ": truncated length prefix";
            break;
        }
        const std::uint32_t len = (std::uint32_t{log_bytes[pos]} << 24) | (std::uint32_t{log_bytes[pos + 1]} << 16) |
                                  (std::uint32_t{log_bytes[pos + 2]} << 8) | std::uint32_t{log_bytes[pos + 3]};
        if (log_bytes.size() - pos - 4 < len) {
            parse_problem = "record " + std::to_string(i) + ": length exceeds file";
            break;
        }
        const auto body = log_bytes.subspan(pos + 4, len);
        try {
            const LogEntry e = decode_entry(body);
            if (e.index != i) {
                parse_problem = "record " + std::to_string(i) + ": stored index " + std::to_string(e.index);
                break;
            }
            digests.push_back(e.manifest_digest);
        } catch (const EncodingError& err) {
            parse_problem = "record " + std::to_string(i) + ": " + err.what();
            break;
        }
        leaves.push_back(leaf_hash(body));
        pos += 4 + len;
    }
    const std::uint64_t parsed = leaves.size();

    // Replay the tree and chain, checking each recorded checkpoint.
    MerkleTree tree;
    Digest32 chain{};
    MerkleRoot root{empty_root(), 0};
    std::uint64_t checked = 0;
    std::uint64_t previous = 0;
    std::size_t line_start = 0;
    while (line_start < checkpoint_text.size()) {
        std::size_t line_end = checkpoint_text.find('\n', line_start);
        if (line_end == std::string_view::npos) line_end = checkpoint_text.size();
        if (line_end == checkpoint_text.size()) {
            return tampered(previous, parsed, checked, "checkpoint file does not end with a newline");
        }
        const std::string_view line = checkpoint_text.substr(line_start, line_end - line_start);
        line_start = line_end + 1;

        const auto cp = parse_checkpoint_line(line);
        if (!cp || cp->tree_size <= previous) {
            return tampered(previous, parsed, checked, "malformed checkpoint after size " + std::to_string(previous));
        }
        if (cp->tree_size > parsed) {
            return tampered(parsed, parsed, checked,
                            parse_problem.value_or("checkpoint at size " + std::to_string(cp->tree_size) +
                                                   " but log holds " + std::to_string(parsed) + " entries"));
        }
        while (tree.size() < cp->tree_size) {
            const std::uint64_t i = tree.size();
            chain = chain_step(root.hash, digests[i]);
            tree.append_leaf(leaves[i]);
            root = tree.root();
        }
        if (root.hash != cp->root || chain != cp->chain) {
            return tampered(previous, parsed, checked,
                            "root/chain mismatch in entries [" + std::to_string(previous) + ", " +
                                std::to_string(cp->tree_size) + ")");
        }
        previous = cp->tree_size;
        ++checked;
    }
    if (parse_problem) return tampered(parsed, parsed, checked, *parse_problem);

    IntegrityReport ok{true, std::nullopt, parsed, checked, {}};
    if (previous < parsed) {
        ok.detail = std::to_string(parsed - previous) + " trailing entries not yet covered by a checkpoint";
    }
    return ok;
}

IntegrityReport check_integrity(const std::filesystem::path& dir) {
    const auto log_path = dir / kLogFileName;
    const auto cp_path = dir / kCheckpointFileName;
    if (!std::filesystem::exists(log_path)) throw StorageError("no log at " + log_path.string());
    const Bytes log_bytes = read_file(log_path);
    Bytes cp_bytes;
    if (std::filesystem::exists(cp_path)) cp_bytes = read_file(cp_path);
    return check_integrity(log_bytes,
                           std::string_view(reinterpret_cast<const char*>(cp_bytes.data()), cp_bytes.size()));
}

}  // namespace manifestd::tlog
