#pragma once

#include "anfis/ann_baseline.hpp"
#include "anfis/error.hpp"
#include "anfis/forecast_pipeline.hpp"
#include "anfis/fuzzy_core.hpp"
#include "anfis/gradcheck.hpp"
#include "anfis/mackey_glass.hpp"
#include "anfis/market_data.hpp"
#include "anfis/metrics.hpp"
#include "anfis/plot.hpp"
#include "anfis/report.hpp"
#include "anfis/rule_induction.hpp"
#include "anfis/serialization.hpp"
#include "anfis/training.hpp"
