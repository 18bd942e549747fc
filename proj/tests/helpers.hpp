#pragma once

#include <gtest/gtest.h>

#include <random>

#include "ims/errors.hpp"

// Fails unless `stmt` throws ims::Error carrying `code`.
#define EXPECT_IMS_ERROR(stmt, expected)                                                   \
  do {                                                                                 \
    try {                                                                              \
      stmt;                                                                            \
      ADD_FAILURE() << "expected " << ims::to_string(expected) << ", nothing was thrown"; \
    } catch (const ims::Error& e_) {                                                   \
      EXPECT_EQ(e_.code(), expected) << e_.what();                                         \
    }                                                                                  \
  } while (0)

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}
