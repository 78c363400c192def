#include <gtest/gtest.h>

#include <clocale>
#include <random>

#include "ted/text_io.hpp"

using namespace ted;

TEST(TextIo, SplitCsvHandlesQuotesAndWhitespace) {
    EXPECT_EQ(text::split_csv_line(" a , b,c"), (std::vector<std::string>{"a", "b", "c"}));
    EXPECT_EQ(text::split_csv_line("\"x,y\",\"say \"\"hi\"\"\""), (std::vector<std::string>{"x,y", "say \"hi\""}));
    EXPECT_EQ(text::split_csv_line("a,,"), (std::vector<std::string>{"a", "", ""}));
}

TEST(TextIo, ParseNumbers) {
    EXPECT_EQ(text::parse_double("1.5"), 1.5);
    EXPECT_EQ(text::parse_double("+2"), 2.0);
    EXPECT_EQ(text::parse_double(" -3e-2 "), -0.03);
    EXPECT_FALSE(text::parse_double("1,5"));
    EXPECT_FALSE(text::parse_double("abc"));
    EXPECT_FALSE(text::parse_double(""));
    EXPECT_EQ(text::parse_int("12"), 12);
    EXPECT_EQ(text::parse_int("3.0"), 3);
    EXPECT_FALSE(text::parse_int("3.5"));
}

TEST(TextIo, FormatRoundTripsExactly) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(-1e6, 1e6);
    for (int i = 0; i < 2000; ++i) {
        const double v = d(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
        EXPECT_EQ(text::parse_double(text::format_double(v)), v);
    }
    EXPECT_EQ(text::format_double(6.0), "6");
}

TEST(TextIo, IgnoresGlobalLocale) {
    const char* prev = std::setlocale(LC_ALL, nullptr);
    std::string saved = prev ? prev : "C";
    if (std::setlocale(LC_ALL, "de_DE.UTF-8") == nullptr) GTEST_SKIP() << "de_DE locale unavailable";
    EXPECT_EQ(text::parse_double("0.25"), 0.25);
    EXPECT_EQ(text::format_double(0.25), "0.25");
    std::setlocale(LC_ALL, saved.c_str());
}

TEST(TextIo, SplitLinesStripsCarriageReturns) {
    const auto lines = text::split_lines("a\r\nb\nc");
    ASSERT_EQ(lines.size(), 3u);
    EXPECT_EQ(lines[0], "a");
    EXPECT_EQ(lines[2], "c");
}
