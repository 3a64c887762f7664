#ifndef REINSURE_REINSURE_HPP
#define REINSURE_REINSURE_HPP

#include "reinsure/bestresponse.hpp"
#include "reinsure/curves.hpp"
#include "reinsure/equilibrium.hpp"
#include "reinsure/errors.hpp"
#include "reinsure/market.hpp"
#include "reinsure/pareto.hpp"

#endif  // REINSURE_REINSURE_HPP
