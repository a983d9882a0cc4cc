#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "geopro/data.hpp"
#include "geopro/errors.hpp"
#include "test_support.hpp"

using namespace geopro;
using testing_support::fixture;

namespace {

ProteinRecord make_record(const std::string& id, std::size_t length) {
    ProteinRecord r;
    r.id = id;
    for (std::size_t i = 0; i < length; ++i) {
        r.sequence.push_back(static_cast<Token>(i % 20));
        r.ca_coords.emplace_back(3.8 * i, 0.1 * i, -0.05 * i);
    }
    return r;
}

std::vector<ProteinRecord> numbered_records(std::size_t n) {
    std::vector<ProteinRecord> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(make_record("P" + std::to_string(i), 30 + i));
    return out;
}

std::set<std::string> ids(const std::vector<ProteinRecord>& rs) {
    std::set<std::string> s;
    for (const auto& r : rs) s.insert(r.id);
    return s;
}

}  // namespace

TEST(Pdb, SingleLine) {
    const std::string line =
        "ATOM      1  CA  ALA A   1      11.000  12.000  13.000  1.00  0.00           C\n";
    auto res = parse_pdb_ca(line, 'A', "x");
    EXPECT_EQ(Vocab::decode(res.record.sequence), "A");
    ASSERT_EQ(res.record.ca_coords.size(), 1u);
    EXPECT_EQ(res.record.ca_coords[0], Point3(11, 12, 13));
}

TEST(Pdb, GoldenFileKeepsAltLocA) {
    auto res = parse_pdb_ca(read_text_file(fixture("golden.pdb")), 'A', "golden");
    EXPECT_EQ(Vocab::decode(res.record.sequence), "MKVLG");
    const PointList want{{0, 0, 0}, {3.8, 0, 0}, {5.0, 3.2, 0.1}, {8.1, 4.4, 1.2}, {10.9, 6.8, 2.0}};
    ASSERT_EQ(res.record.ca_coords.size(), 5u);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR((res.record.ca_coords[i] - want[i]).norm(), 0, 1e-12);
    EXPECT_EQ(res.record.id, "golden");
}

TEST(Pdb, ChainFilter) {
    auto res = parse_pdb_ca(read_text_file(fixture("golden.pdb")), 'B');
    EXPECT_EQ(Vocab::decode(res.record.sequence), "AS");
    EXPECT_THROW(parse_pdb_ca(read_text_file(fixture("golden.pdb")), 'C'), DataError);
}

TEST(Pdb, OrdersByResidueNumberAndInsertionCode) {
    const std::string text =
        "ATOM      3  CA  GLY A   2      3.000   0.000   0.000  1.00  0.00           C\n"
        "ATOM      2  CA  SER A   1A     2.000   0.000   0.000  1.00  0.00           C\n"
        "ATOM      1  CA  ALA A   1      1.000   0.000   0.000  1.00  0.00           C\n";
    auto res = parse_pdb_ca(text, 'A');
    EXPECT_EQ(Vocab::decode(res.record.sequence), "ASG");
}

TEST(Pdb, UnknownResidueSkippedWithWarning) {
    const std::string text =
        "ATOM      1  CA  ALA A   1       0.000   0.000   0.000  1.00  0.00           C\n"
        "ATOM      2  CA  MSE A   2       3.800   0.000   0.000  1.00  0.00           C\n"
        "ATOM      3  CA  GLY A   3       7.600   0.000   0.000  1.00  0.00           C\n";
    auto res = parse_pdb_ca(text, 'A');
    EXPECT_EQ(Vocab::decode(res.record.sequence), "AG");
    EXPECT_EQ(res.skipped_residues, std::vector<int>{2});
    ASSERT_FALSE(res.warnings.empty());
    EXPECT_NE(res.warnings[0].find("MSE"), std::string::npos);
}

TEST(Pdb, RoundTripThroughWriter) {
    auto rec = make_record("rt", 12);
    rec.ca_coords[3] = Point3(-12.3456, 7.0001, 100.5);
    auto back = parse_pdb_ca(write_pdb_ca(rec), 'A', "rt").record;
    EXPECT_EQ(back.sequence, rec.sequence);
    for (std::size_t i = 0; i < rec.length(); ++i) {
        EXPECT_LE((back.ca_coords[i] - rec.ca_coords[i]).cwiseAbs().maxCoeff(), 0.0005 + 1e-12);
    }
    const std::string text = write_pdb_ca(rec);
    EXPECT_NE(text.find("  1.00  0.00"), std::string::npos);
    EXPECT_EQ(text.substr(text.size() - 4), "END\n");
}

TEST(Record, ValidationAndSpacingWarnings) {
    auto rec = make_record("v", 4);
    EXPECT_NO_THROW(rec.validate());
    EXPECT_TRUE(rec.spacing_warnings().empty());
    rec.ca_coords[2] = rec.ca_coords[1] + Point3(6, 0, 0);
    EXPECT_FALSE(rec.spacing_warnings().empty());
    rec.sequence.push_back(Vocab::kMask);
    EXPECT_THROW(rec.validate(), DataError);
    ProteinRecord empty;
    EXPECT_THROW(empty.validate(), DataError);
}

TEST(Fasta, Multiline) {
    auto e = parse_fasta(">p1\nACD\nEFG");
    ASSERT_EQ(e.size(), 1u);
    EXPECT_EQ(e[0].id, "p1");
    EXPECT_EQ(e[0].sequence, "ACDEFG");
}

TEST(Fasta, EmptyInput) { EXPECT_TRUE(parse_fasta("").empty()); }

TEST(Fasta, BlankLinesBetweenRecords) {
    auto e = parse_fasta(">a desc\nMK\n\n\n>b\nVL\n\n");
    ASSERT_EQ(e.size(), 2u);
    EXPECT_EQ(e[0].id, "a");
    EXPECT_EQ(e[1].sequence, "VL");
}

TEST(Fasta, BadCharacterReportsLine) {
    try {
        parse_fasta(">a\nMK\nM1K\n");
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    EXPECT_THROW(parse_fasta(">a\nM-K\n"), ParseError);
    EXPECT_NO_THROW(parse_fasta(">a\nM-K\n", true));
}

TEST(Fasta, WriteThenParse) {
    std::vector<FastaEntry> in{{"x", std::string(130, 'A')}, {"y", "MKV"}};
    auto text = write_fasta(in, 60);
    auto out = parse_fasta(text);
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].sequence, in[0].sequence);
    EXPECT_EQ(out[1].id, "y");
}

TEST(Motif, FixtureAlignmentHandCases) {
    auto aln = Alignment::from_fasta(read_text_file(fixture("family.afa")), "ref");
    EXPECT_EQ(extract_motif(aln, 0.8), (std::vector<std::size_t>{0, 1}));
    EXPECT_EQ(extract_motif(aln, 0.7), (std::vector<std::size_t>{0, 1, 3, 5, 6}));
    EXPECT_EQ(extract_motif(aln, 0.5), (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6}));
}

TEST(Motif, SpecColumns) {
    auto all_h = Alignment::from_fasta(">r\nH\n>a\nH\n>b\nH\n>c\nH\n");
    EXPECT_EQ(extract_motif(all_h, 0.8), std::vector<std::size_t>{0});
    auto mixed = Alignment::from_fasta(">r\nA\n>a\nA\n>b\nC\n>c\nC\n");
    EXPECT_TRUE(extract_motif(mixed, 0.8).empty());
    auto gapped = Alignment::from_fasta(">r\nA\n>a\nA\n>b\nA\n>c\n-\n");
    EXPECT_EQ(extract_motif(gapped, 0.7), std::vector<std::size_t>{0});
    EXPECT_TRUE(extract_motif(gapped, 0.8).empty());
}

TEST(Motif, InvariantUnderRowOrder) {
    auto text = read_text_file(fixture("family.afa"));
    auto aln = Alignment::from_fasta(text, "ref");
    auto shuffled = aln;
    std::reverse(shuffled.rows.begin(), shuffled.rows.end());
    for (double lambda : {0.5, 0.7, 0.8, 1.0}) {
        EXPECT_EQ(extract_motif(aln, lambda), extract_motif(shuffled, lambda));
        for (auto p : extract_motif(aln, lambda)) EXPECT_LT(p, 7u);
    }
}

TEST(Motif, Errors) {
    auto gaps = Alignment::from_fasta(">r\n--\n>a\nAA\n");
    EXPECT_THROW(extract_motif(gaps, 0.5), ContractError);
    auto ok = Alignment::from_fasta(">r\nAA\n>a\nAA\n");
    EXPECT_THROW(extract_motif(ok, 0.0), ContractError);
    EXPECT_THROW(extract_motif(ok, 1.5), ContractError);
    EXPECT_THROW(Alignment::from_fasta(">r\nAA\n>a\nAAA\n").validate(), DataError);
    EXPECT_THROW(Alignment::from_fasta(">r\nAA\n", "missing"), DataError);
}

TEST(Split, TenRecordsEightOneOne) {
    auto split = filter_and_split(numbered_records(10), 0, {}, 42);
    EXPECT_EQ(split.train.size(), 8u);
    EXPECT_EQ(split.valid.size(), 1u);
    EXPECT_EQ(split.test.size(), 1u);
}

TEST(Split, DisjointCoverAndDeterministic) {
    auto a = filter_and_split(numbered_records(37), 0, {}, 7);
    auto b = filter_and_split(numbered_records(37), 0, {}, 7);
    EXPECT_EQ(ids(a.train), ids(b.train));
    EXPECT_EQ(ids(a.valid), ids(b.valid));
    std::set<std::string> all;
    for (const auto* part : {&a.train, &a.valid, &a.test})
        for (const auto& r : *part) EXPECT_TRUE(all.insert(r.id).second) << r.id;
    EXPECT_EQ(all, ids(numbered_records(37)));
    EXPECT_EQ(a.valid.size(), 3u);
    EXPECT_EQ(a.test.size(), 3u);
    auto c = filter_and_split(numbered_records(37), 0, {}, 8);
    EXPECT_NE(ids(a.valid), ids(c.valid));
}

TEST(Split, LengthFilterIsStrict) {
    std::vector<ProteinRecord> rs{make_record("short", 150), make_record("edge", 200),
                                  make_record("long", 201)};
    auto split = filter_and_split(rs, 200, {}, 1);
    EXPECT_EQ(split.train.size() + split.valid.size() + split.test.size(), 1u);
    EXPECT_EQ(split.train.at(0).id, "long");
    EXPECT_THROW(filter_and_split({make_record("s", 50)}, 100, {}, 1), DataError);
}

TEST(Manifest, RoundTrip) {
    auto split = filter_and_split(numbered_records(10), 0, {}, 3);
    auto rows = parse_split_manifest(write_split_manifest(split));
    ASSERT_EQ(rows.size(), 10u);
    std::size_t train = 0;
    for (const auto& r : rows) train += r.split == "train";
    EXPECT_EQ(train, 8u);
    EXPECT_THROW(parse_split_manifest("id,split\nx,holdout\n"), ParseError);
}

TEST(MotifFile, RoundTripAndComments) {
    std::vector<MotifEntry> in{{"1ABC", {0, 4, 9}}, {"2XYZ", {3}}};
    auto out = parse_motif_file("# header\n" + write_motif_file(in));
    ASSERT_EQ(out.size(), 2u);
    EXPECT_EQ(out[0].id, "1ABC");
    EXPECT_EQ(out[0].positions, (std::vector<std::size_t>{0, 4, 9}));
    EXPECT_EQ(parse_motif_file("1ABC 1,0\n").at(0).positions, (std::vector<std::size_t>{0, 1}));
    EXPECT_THROW(parse_motif_file("1ABC\n"), ParseError);
    EXPECT_THROW(parse_motif_file("1ABC\t0,x\n"), ParseError);
}

TEST(AllowList, UppercasesAndSkipsComments) {
    auto ids = parse_allow_list("# metal binders\n1abc\n  2XYZ  # zinc\n\n");
    EXPECT_EQ(ids, (std::set<std::string>{"1ABC", "2XYZ"}));
}

TEST(Files, AtomicWriteThenRead) {
    const auto dir = std::filesystem::temp_directory_path() / "geopro_test_data";
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "a.txt", "hello\n");
    EXPECT_EQ(read_text_file(dir / "a.txt"), "hello\n");
    EXPECT_THROW(read_text_file(dir / "missing.txt"), DataError);
    std::filesystem::remove_all(dir);
}
