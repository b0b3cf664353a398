#include <gtest/gtest.h>

#include <bit>
#include <cmath>

#include "manifestd/error.hpp"
#include "manifestd/rng.hpp"
#include "manifestd/stats.hpp"
#include "manifestd/transparency_log.hpp"
#include "test_util.hpp"

using namespace manifestd;
using namespace manifestd::tlog;

namespace {

Digest32 test_leaf(std::uint64_t i) { return leaf_hash(as_bytes("leaf-" + std::to_string(i))); }

MerkleTree tree_of(std::uint64_t n) {
    MerkleTree t;
    for (std::uint64_t i = 0; i < n; ++i) t.append_leaf(test_leaf(i));
    return t;
}

std::uint64_t ceil_log2(std::uint64_t n) { return n <= 1 ? 0 : std::bit_width(n - 1); }

Bytes fixed_sig() { return Bytes(64, 0xab); }

TransparencyLog filled(const std::filesystem::path& dir, std::uint64_t n) {
    TransparencyLog log = TransparencyLog::open(dir);
    for (std::uint64_t i = 0; i < n; ++i) {
        log.append(sha256("m" + std::to_string(i)), fixed_sig(), "dev-k1", 1700000000000ULL + i);
    }
    return log;
}

}  // namespace

TEST(MerkleHash, DomainSeparation) {
    EXPECT_EQ(empty_root().hex(), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    const Digest32 l = test_leaf(0);
    EXPECT_NE(l, sha256("leaf-0"));
    EXPECT_NE(node_hash(l, l), sha256(std::string(64, '\0')));
}

TEST(MerkleTree, RootsMatchReferenceImplementation) {
    // Roots from an independent recursive implementation of the
    // certificate-transparency tree hash over leaves "leaf-i".
    const std::pair<std::uint64_t, const char*> expected[] = {
        {1, "305df59f9590c3c9ac63d2b2743c388e3792449078cebf7fb3dbe6471643b2b7"},
        {2, "60a53eed0de87a90c8e59427c59c46253c33a76a09502a51801300927b7e6bdc"},
        {3, "cf763a041c81ceef1578a6083f75c61bef2e0014f2a3e683a97fcfca5be7f19a"},
        {5, "00d21829a5503145348abcf712513eacf2a274211ad83e970202bb5b6d80b286"},
        {7, "0b007fb915eb9b2a146f54b1c86ec53b664f8e455b7660b0b6ee13edc0d921c0"},
        {8, "ca6b7b3e674ac86c1027b59c87c064fc3bc27b313294c75f83bd05fdd13f0dcf"},
        {13, "a8ef4844c8e1d5ba49c811cdb86e95791f5d32ca7d9709afda28fdf65e949a53"},
    };
    const MerkleTree t = tree_of(13);
    for (const auto& [n, hex] : expected) EXPECT_EQ(t.root_at(n).hash.hex(), hex) << n;
}

TEST(MerkleTree, SmallTrees) {
    MerkleTree t;
    EXPECT_EQ(t.root().hash, empty_root());
    t.append_leaf(test_leaf(0));
    EXPECT_EQ(t.root().hash, test_leaf(0));
    EXPECT_TRUE(t.prove_inclusion(0, 1).path.empty());
    t.append_leaf(test_leaf(1));
    EXPECT_EQ(t.root().hash, node_hash(test_leaf(0), test_leaf(1)));
    EXPECT_EQ(t.root().tree_size, 2u);
}

TEST(MerkleTree, IncrementalRootsMatchFullRebuild) {
    const MerkleTree t = tree_of(64);
    std::vector<Digest32> leaves;
    for (std::uint64_t n = 1; n <= 64; ++n) {
        leaves.push_back(test_leaf(n - 1));
        ASSERT_EQ(t.root_at(n).hash, rebuild_root(leaves)) << n;
    }
}

TEST(MerkleTree, ExhaustiveInclusionUpTo64) {
    const MerkleTree t = tree_of(64);
    std::vector<Digest32> leaves;
    for (std::uint64_t n = 1; n <= 64; ++n) {
        leaves.push_back(test_leaf(n - 1));
        const MerkleRoot root{rebuild_root(leaves), n};
        for (std::uint64_t i = 0; i < n; ++i) {
            const MerkleProof p = t.prove_inclusion(i, n);
            ASSERT_TRUE(verify_inclusion(test_leaf(i), p, root)) << i << "/" << n;
            ASSERT_EQ(p.path.size(), audit_path_length(i, n));
            ASSERT_LE(p.path.size(), ceil_log2(n));
            if (std::has_single_bit(n)) ASSERT_EQ(p.path.size(), ceil_log2(n));
        }
    }
    EXPECT_EQ(t.prove_inclusion(5, 8).path.size(), 3u);
}

TEST(MerkleTree, CorruptedProofsRejected) {
    const MerkleTree t = tree_of(37);
    const MerkleRoot root = t.root();
    for (std::uint64_t i = 0; i < 37; ++i) {
        const MerkleProof p = t.prove_inclusion(i, 37);
        for (std::size_t k = 0; k < p.path.size(); ++k) {
            MerkleProof bad = p;
            bad.path[k].sibling.bytes[k % 32] ^= 0x01;
            ASSERT_FALSE(verify_inclusion(test_leaf(i), bad, root));
            bad = p;
            bad.path[k].side = bad.path[k].side == Side::left ? Side::right : Side::left;
            ASSERT_FALSE(verify_inclusion(test_leaf(i), bad, root));
        }
        ASSERT_FALSE(verify_inclusion(test_leaf((i + 1) % 37), p, root));
        MerkleProof shifted = p;
        shifted.leaf_index = (i + 1) % 37;
        ASSERT_FALSE(verify_inclusion(test_leaf(i), shifted, root));
        MerkleProof shortened = p;
        if (!shortened.path.empty()) {
            shortened.path.pop_back();
            ASSERT_FALSE(verify_inclusion(test_leaf(i), shortened, root));
        }
    }
}

TEST(MerkleTree, RandomizedCorruptionTrials) {
    const MerkleTree t = tree_of(1000);
    CounterRng rng(31337);
    int rejected = 0;
    const int trials = 100000;
    for (int trial = 0; trial < trials; ++trial) {
        const std::uint64_t n = 1 + rng.below(1000);
        const std::uint64_t i = rng.below(n);
        MerkleProof p = t.prove_inclusion(i, n);
        Digest32 leaf = test_leaf(i);
        MerkleRoot root = t.root_at(n);
        const auto which = rng.below(p.path.size() + 2);
        const auto byte = rng.below(32);
        const auto mask = static_cast<std::uint8_t>(1 + rng.below(255));
        if (which < p.path.size()) {
            p.path[which].sibling.bytes[byte] ^= mask;
        } else if (which == p.path.size()) {
            leaf.bytes[byte] ^= mask;
        } else {
            root.hash.bytes[byte] ^= mask;
        }
        rejected += !verify_inclusion(leaf, p, root);
    }
    EXPECT_EQ(rejected, trials);
}

TEST(MerkleTree, ConsistencyProofs) {
    const MerkleTree t = tree_of(40);
    for (std::uint64_t n = 1; n <= 40; ++n) {
        for (std::uint64_t m = 1; m <= n; ++m) {
            const auto p = t.prove_consistency(m, n);
            ASSERT_TRUE(verify_consistency(p, t.root_at(m), t.root_at(n))) << m << "->" << n;
            if (!p.path.empty()) {
                auto bad = p;
                bad.path[0].bytes[0] ^= 1;
                ASSERT_FALSE(verify_consistency(bad, t.root_at(m), t.root_at(n)));
            }
            if (m < n) ASSERT_FALSE(verify_consistency(p, t.root_at(m), t.root_at(n - 1 == 0 ? 1 : n - 1)));
        }
    }
}

TEST(MerkleTree, OutOfRange) {
    const MerkleTree t = tree_of(4);
    EXPECT_THROW(t.prove_inclusion(4, 4), OutOfRange);
    EXPECT_THROW(t.prove_inclusion(0, 5), OutOfRange);
    EXPECT_THROW(t.prove_inclusion(0, 0), OutOfRange);
    EXPECT_THROW(t.prove_consistency(0, 2), OutOfRange);
    EXPECT_THROW(t.prove_consistency(3, 2), OutOfRange);
}

TEST(MerkleTree, HashOpsLogarithmicPerAppend) {
    // Per append: leaf hashing is done by the caller, the tree itself merges
    // completed subtrees and recomputes the root.
    MerkleTree t;
    const std::uint64_t n = 1024;
    std::uint64_t worst = 0;
    std::vector<Digest32> leaves;
    std::uint64_t naive_last = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t before = t.hash_ops();
        t.append_leaf(test_leaf(i));
        (void)t.root();
        worst = std::max(worst, t.hash_ops() - before);
        leaves.push_back(test_leaf(i));
    }
    rebuild_root(leaves, &naive_last);
    EXPECT_LE(worst, 2 * 10u);
    EXPECT_LT(static_cast<double>(t.hash_ops()) / n, 10.0);
    EXPECT_EQ(naive_last, n - 1);  // a full rebuild costs N - 1 node hashes for one root
}

TEST(LogEntry, EncodingMatchesReference) {
    const LogEntry e{3, sha256("abc"), Bytes{1, 2, 3}, "dev-k1", 1700000000123ULL};
    const Bytes body = encode_entry(e);
    EXPECT_EQ(to_hex(body),
              "0100000000000000030000018bcfe5687bba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad0006"
              "6465762d6b310003010203");
    EXPECT_EQ(leaf_hash(body).hex(), "812319b9ecac47918bd6135081634715a6eb4b75479e8d52b9fb7189d79aa458");
    EXPECT_EQ(decode_entry(body), e);

    Bytes extra = body;
    extra.push_back(0);
    EXPECT_THROW(decode_entry(extra), EncodingError);
    Bytes version = body;
    version[0] = 2;
    EXPECT_THROW(decode_entry(version), EncodingError);
    EXPECT_THROW(decode_entry(std::span(body).first(body.size() - 1)), EncodingError);
}

TEST(TransparencyLog, FirstAppendsAndChain) {
    TransparencyLog log;
    const auto d0 = sha256("abc");
    const auto r0 = log.append(d0, Bytes{1, 2, 3}, "dev-k1", 1700000000123ULL);
    EXPECT_EQ(r0.index, 0u);
    const Bytes body0 = encode_entry(log.entry(0));
    EXPECT_EQ(r0.root.hash, leaf_hash(body0));
    EXPECT_EQ(r0.root.tree_size, 1u);
    // chain_1 = H(R_0 || d_1) with R_0 the empty-tree root.
    EXPECT_EQ(r0.chain.hex(), "bddbdf7e9df02f902ee5dd61b2b513d7566a2112ff97db7dc3b6d184a43ef0e3");
    EXPECT_EQ(log.chain_at(0), Digest32{});

    const auto r1 = log.append(sha256("def"), Bytes{4}, "dev-k2", 1700000000124ULL);
    EXPECT_EQ(r1.index, 1u);
    EXPECT_EQ(r1.root.hash, node_hash(leaf_hash(body0), leaf_hash(encode_entry(log.entry(1)))));
    EXPECT_EQ(r1.chain, chain_step(r0.root.hash, sha256("def")));
}

TEST(TransparencyLog, PersistsAcrossRestart) {
    testutil::TempDir dir;
    MerkleRoot root;
    Digest32 chain;
    {
        TransparencyLog log = filled(dir.path(), 25);
        root = log.root();
        chain = log.chain();
    }
    TransparencyLog again = TransparencyLog::open(dir.path());
    EXPECT_EQ(again.size(), 25u);
    EXPECT_EQ(again.root(), root);
    EXPECT_EQ(again.chain(), chain);
    again.append(sha256("next"), fixed_sig(), "dev-k1", 1);
    EXPECT_TRUE(verify_consistency(again.prove_consistency(25, 26), root, again.root()));
    const auto rep = check_integrity(dir.path());
    EXPECT_TRUE(rep.ok) << rep.detail;
    EXPECT_EQ(rep.entries, 26u);
    EXPECT_EQ(rep.checkpoints, 26u);
}

TEST(TransparencyLog, CheckpointIntervalAndTrailingEntries) {
    testutil::TempDir dir;
    {
        TransparencyLog log = TransparencyLog::open(dir.path(), LogOptions{4, false});
        for (int i = 0; i < 10; ++i) log.append(sha256(std::to_string(i)), fixed_sig(), "k", 1);
    }
    const auto rep = check_integrity(dir.path());
    EXPECT_TRUE(rep.ok);
    EXPECT_EQ(rep.checkpoints, 2u);
    EXPECT_FALSE(rep.detail.empty());
}

TEST(TransparencyLog, UntamperedThousand) {
    testutil::TempDir dir;
    filled(dir.path(), 1000);
    const auto rep = check_integrity(dir.path());
    EXPECT_TRUE(rep.ok) << rep.detail;
    EXPECT_EQ(rep.entries, 1000u);
}

TEST(TransparencyLog, ByteFlipLocalized) {
    testutil::TempDir dir;
    const TransparencyLog log = filled(dir.path(), 1000);
    const std::string original = testutil::slurp(dir / "log.bin");
    const std::uint64_t start = log.storage_bytes(417);
    const std::uint64_t len = log.storage_bytes(418) - start;
    for (std::uint64_t off = 0; off < len; ++off) {
        std::string copy = original;
        copy[start + off] = static_cast<char>(copy[start + off] ^ 0x5a);
        const auto rep = check_integrity(as_bytes(copy), testutil::slurp(dir / "checkpoints.txt"));
        ASSERT_FALSE(rep.ok) << off;
        ASSERT_EQ(rep.tampered_at, 417u) << off << " " << rep.detail;
    }
}

TEST(TransparencyLog, TruncationDetected) {
    testutil::TempDir dir;
    const TransparencyLog log = filled(dir.path(), 50);
    std::string data = testutil::slurp(dir / "log.bin");
    data.resize(log.storage_bytes(49));
    testutil::spit(dir / "log.bin", data);
    const auto rep = check_integrity(dir.path());
    EXPECT_FALSE(rep.ok);
    EXPECT_EQ(rep.tampered_at, 49u);
}

TEST(TransparencyLog, CheckpointCorruptionDetected) {
    testutil::TempDir dir;
    filled(dir.path(), 30);
    const std::string log_bytes = testutil::slurp(dir / "log.bin");
    const std::string cps = testutil::slurp(dir / "checkpoints.txt");
    CounterRng rng(8);
    for (std::size_t pos = 0; pos < cps.size(); ++pos) {
        std::string copy = cps;
        char c;
        do {
            c = static_cast<char>(rng.below(256));
        } while (c == cps[pos]);
        copy[pos] = c;
        ASSERT_FALSE(check_integrity(as_bytes(log_bytes), copy).ok) << pos;
    }
}

TEST(TransparencyLog, CorruptFileRefusedOnOpen) {
    testutil::TempDir dir;
    filled(dir.path(), 5);
    std::string data = testutil::slurp(dir / "log.bin");
    data[5] = static_cast<char>(data[5] ^ 0xff);
    testutil::spit(dir / "log.bin", data);
    EXPECT_THROW(TransparencyLog::open(dir.path()), StorageError);

    testutil::spit(dir / "plain-file", "x");
    EXPECT_THROW(TransparencyLog::open(dir / "plain-file"), StorageError);
    EXPECT_THROW(check_integrity(dir / "nothing-here"), StorageError);
}

TEST(TransparencyLog, GrowthSeries) {
    TransparencyLog log;
    for (int i = 0; i < 5000; ++i) log.append(sha256(std::to_string(i)), fixed_sig(), "dev-k1", 1);
    const std::vector<std::uint64_t> marks{100, 500, 1000, 5000};
    const auto series = log_growth_series(log, marks);
    ASSERT_EQ(series.size(), 4u);
    const std::uint64_t per = series[0].second / 100;
    for (const auto& [n, bytes] : series) EXPECT_EQ(bytes, per * n);
    std::vector<stats::Point> pts;
    for (const auto& [n, b] : series) pts.emplace_back(static_cast<double>(n), static_cast<double>(b));
    const auto fit = stats::loglog_fit(pts);
    EXPECT_GE(fit.slope, 0.98);
    EXPECT_LE(fit.slope, 1.06);
    EXPECT_TRUE(log_growth_series(log, std::vector<std::uint64_t>{}).empty());
}
