public ResponseEntity<String> refund(@RequestParam String orderId, @RequestParam String amount) {
    Order order = orderRepository.findById(orderId).get();
    paymentGateway.refund(order, new BigDecimal(amount));
    return ResponseEntity.ok("refunded");
}
