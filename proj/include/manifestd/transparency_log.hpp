#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "manifestd/hash.hpp"
#include "manifestd/manifest.hpp"

namespace manifestd::tlog {

struct LogEntry {
    std::uint64_t index = 0;
    ManifestDigest manifest_digest;
    Bytes signature;
    std::string key_id;
    std::uint64_t appended_at = 0;

    friend bool operator==(const LogEntry&, const LogEntry&) = default;
};

// Entry body stored inside each length-prefixed record:
//   u8 version(1) | u64 index | u64 appended_at | 32B digest |
//   u16 key_id length | key_id | u16 signature length | signature
// All integers big-endian.
Bytes encode_entry(const LogEntry& e);
LogEntry decode_entry(std::span<const std::uint8_t> body);

struct MerkleRoot {
    Digest32 hash;
    std::uint64_t tree_size = 0;

    friend bool operator==(const MerkleRoot&, const MerkleRoot&) = default;
};

// Side of the proof path on which the sibling sits.
enum class Side { left, right };

struct ProofStep {
    Digest32 sibling;
    Side side;

    friend bool operator==(const ProofStep&, const ProofStep&) = default;
};

struct MerkleProof {
    std::uint64_t leaf_index = 0;
    std::uint64_t tree_size = 0;
    std::vector<ProofStep> path;  // leaf to root
};

struct ConsistencyProof {
    std::uint64_t old_size = 0;
    std::uint64_t new_size = 0;
    std::vector<Digest32> path;
};

// Domain-separated hashing: leaves H(0x00 || data), interior H(0x01 || l || r).
Digest32 leaf_hash(std::span<const std::uint8_t> data);
Digest32 node_hash(const Digest32& left, const Digest32& right);
Digest32 empty_root();

// Incremental Merkle tree in the certificate-transparency shape. Every
// completed perfect subtree is kept, so appends cost O(1) amortized node
// hashes, a root costs popcount(size) - 1 and proofs O(log N).
class MerkleTree {
public:
    void append_leaf(const Digest32& leaf);

    std::uint64_t size() const { return levels_.empty() ? 0 : levels_[0].size(); }
    const Digest32& leaf(std::uint64_t index) const { return levels_.at(0).at(index); }

    MerkleRoot root() const { return root_at(size()); }
    MerkleRoot root_at(std::uint64_t tree_size) const;

    // Throws OutOfRange unless index < tree_size <= size().
    MerkleProof prove_inclusion(std::uint64_t index, std::uint64_t tree_size) const;
    // Throws OutOfRange unless 0 < old_size <= new_size <= size().
    ConsistencyProof prove_consistency(std::uint64_t old_size, std::uint64_t new_size) const;

    // Node and leaf hash invocations performed by this tree so far.
    std::uint64_t hash_ops() const { return hash_ops_.load(std::memory_order_relaxed); }
    void count_hash_ops(std::uint64_t n) const { hash_ops_.fetch_add(n, std::memory_order_relaxed); }

    MerkleTree() = default;
    MerkleTree(const MerkleTree& o) : levels_(o.levels_), hash_ops_(o.hash_ops()) {}
    MerkleTree(MerkleTree&& o) noexcept : levels_(std::move(o.levels_)), hash_ops_(o.hash_ops()) {}
    MerkleTree& operator=(MerkleTree o) noexcept {
        levels_ = std::move(o.levels_);
        hash_ops_.store(o.hash_ops());
        return *this;
    }

private:
    Digest32 hash_node(const Digest32& l, const Digest32& r) const;
    Digest32 subtree(std::uint64_t begin, std::uint64_t end) const;
    void path(std::uint64_t index, std::uint64_t begin, std::uint64_t end, std::vector<ProofStep>& out) const;
    void subproof(std::uint64_t m, std::uint64_t begin, std::uint64_t end, bool complete,
                  std::vector<Digest32>& out) const;

    // levels_[k][i] is the root of the perfect subtree over leaves
    // [i * 2^k, (i + 1) * 2^k).
    std::vector<std::vector<Digest32>> levels_;
    mutable std::atomic<std::uint64_t> hash_ops_{0};
};

// Accepts iff the leaf folded along the path reproduces root.hash and the
// path shape matches (leaf_index, tree_size).
bool verify_inclusion(const Digest32& leaf, const MerkleProof& proof, const MerkleRoot& root);

bool verify_consistency(const ConsistencyProof& proof, const MerkleRoot& old_root, const MerkleRoot& new_root);

// Number of nodes on the audit path of leaf_index in a tree of tree_size.
std::uint64_t audit_path_length(std::uint64_t leaf_index, std::uint64_t tree_size);

// Root over a full leaf list by direct recursion; reference for tests and
// tools that rebuild from scratch.
Digest32 rebuild_root(std::span<const Digest32> leaves, std::uint64_t* hash_ops = nullptr);

// chain_{t+1} = H(R_t || d_{t+1}): links each new entry's manifest digest to
// the tree root that preceded it.
Digest32 chain_step(const Digest32& previous_root, const ManifestDigest& digest);

struct Checkpoint {
    std::uint64_t tree_size = 0;
    Digest32 root;
    Digest32 chain;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string format_checkpoint(const Checkpoint& c);

struct AppendReceipt {
    std::uint64_t index;
    MerkleRoot root;
    Digest32 chain;
};

struct LogOptions {
    // A checkpoint line is written every `checkpoint_interval` appends.
    std::uint64_t checkpoint_interval = 1;
    // fsync the record file on every append.
    bool fsync = false;
};

inline constexpr std::string_view kLogFileName = "log.bin";
inline constexpr std::string_view kCheckpointFileName = "checkpoints.txt";

// Append-only log of signed-manifest records over a Merkle tree. A single
// writer appends; reads of already published sizes may run concurrently.
class TransparencyLog {
public:
    // Purely in-memory log (no files).
    TransparencyLog();
    ~TransparencyLog();
    TransparencyLog(TransparencyLog&&) noexcept;
    TransparencyLog& operator=(TransparencyLog&&) noexcept;

    // Opens or creates <dir>/log.bin and <dir>/checkpoints.txt, replaying the
    // existing records. Throws StorageError if the files cannot be read or
    // the record stream does not parse.
    static TransparencyLog open(const std::filesystem::path& dir, LogOptions options = {});

    // Record is written (and flushed) before the new root is returned.
    // Throws StorageError; on failure nothing is appended.
    AppendReceipt append(const ManifestDigest& digest, std::span<const std::uint8_t> signature,
                         const std::string& key_id, std::uint64_t appended_at);

    std::uint64_t size() const;
    const LogEntry& entry(std::uint64_t index) const;
    Digest32 leaf(std::uint64_t index) const;
    MerkleRoot root() const;
    MerkleRoot root_at(std::uint64_t tree_size) const;
    Digest32 chain() const;
    Digest32 chain_at(std::uint64_t tree_size) const;

    MerkleProof prove_inclusion(std::uint64_t index, std::uint64_t tree_size) const;
    ConsistencyProof prove_consistency(std::uint64_t old_size, std::uint64_t new_size) const;

    // Bytes of record storage used by the first n entries (length prefix
    // included).
    std::uint64_t storage_bytes(std::uint64_t n) const;
    std::uint64_t storage_bytes() const { return storage_bytes(size()); }

    // (N, cumulative storage bytes) at each checkpoint N <= size().
    std::vector<std::pair<std::uint64_t, std::uint64_t>> growth_series(
        std::span<const std::uint64_t> checkpoints) const;

    std::uint64_t hash_ops() const;
    const std::optional<std::filesystem::path>& directory() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct IntegrityReport {
    bool ok = true;
    std::optional<std::uint64_t> tampered_at;
    std::uint64_t entries = 0;
    std::uint64_t checkpoints = 0;
    std::string detail;
};

// Re-parses every record, recomputes leaves, roots and chain values and
// compares them with the checkpoint sidecar. Reports the first entry index
// whose stored data no longer matches. Throws StorageError if the files are
// unreadable.
IntegrityReport check_integrity(const std::filesystem::path& dir);
IntegrityReport check_integrity(std::span<const std::uint8_t> log_bytes, std::string_view checkpoint_text);

std::vector<std::pair<std::uint64_t, std::uint64_t>> log_growth_series(const TransparencyLog& log,
                                                                       std::span<const std::uint64_t> checkpoints);

}  // namespace manifestd::tlog
