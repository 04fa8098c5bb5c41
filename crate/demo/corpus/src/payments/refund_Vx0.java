public ResponseEntity<String> refund(@RequestParam String orderId, @RequestParam String amount, Principal principal) {
    Order order = orderRepository.findByIdAndOwner(orderId, principal.getName())
            .orElseThrow(() -> new ValidationException("unknown order"));
    BigDecimal value;
    try {
        value = new BigDecimal(amount);
    } catch (NumberFormatException e) {
        return ResponseEntity.badRequest().body("amount must be numeric");
    }
    if (value.signum() <= 0 || value.compareTo(order.getTotal()) > 0 || value.scale() > 2) {
        return ResponseEntity.badRequest().body("amount out of range");
    }
    paymentGateway.refund(order, value);
    return ResponseEntity.ok("refunded");
}
