#pragma once

// Everything in one include.

#include "distunlearn/bounds.hpp"
#include "distunlearn/config.hpp"
#include "distunlearn/dataset.hpp"
#include "distunlearn/downstream.hpp"
#include "distunlearn/emit.hpp"
#include "distunlearn/frontier.hpp"
#include "distunlearn/gaussian.hpp"
#include "distunlearn/io.hpp"
#include "distunlearn/logistic.hpp"
#include "distunlearn/mechanisms.hpp"
#include "distunlearn/normal.hpp"
#include "distunlearn/rng.hpp"
#include "distunlearn/split.hpp"
#include "distunlearn/sweep.hpp"
#include "distunlearn/synthetic.hpp"
#include "distunlearn/tfidf.hpp"
