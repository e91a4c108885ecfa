#pragma once

#include "bubbles/bootstrap.hpp"
#include "bubbles/datestamp.hpp"
#include "bubbles/dgp.hpp"
#include "bubbles/inference.hpp"
#include "bubbles/ols.hpp"
#include "bubbles/parallel.hpp"
#include "bubbles/random.hpp"
#include "bubbles/recursive.hpp"
#include "bubbles/series.hpp"
#include "bubbles/stats.hpp"
#include "bubbles/report.hpp"
