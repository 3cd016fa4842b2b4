#pragma once

#include "rfa/baselines.hpp"
#include "rfa/dgp.hpp"
#include "rfa/distributions.hpp"
#include "rfa/error.hpp"
#include "rfa/factor_number.hpp"
#include "rfa/io.hpp"
#include "rfa/metrics.hpp"
#include "rfa/panel.hpp"
#include "rfa/parallel.hpp"
#include "rfa/portfolio.hpp"
#include "rfa/quantreg.hpp"
#include "rfa/random.hpp"
#include "rfa/rip.hpp"
#include "rfa/simlab.hpp"
