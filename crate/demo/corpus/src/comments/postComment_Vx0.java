public ResponseEntity<String> postComment(@RequestParam String postId, @RequestParam String body) {
    if (!POST_ID.matcher(postId).matches()) {
        return ResponseEntity.badRequest().body("invalid post");
    }
    if (body.isBlank() || body.length() > 2000) {
        return ResponseEntity.badRequest().body("comment length must be 1-2000");
    }
    String safe = HtmlUtils.htmlEscape(body);
    commentRepository.save(new Comment(postId, safe));
    return ResponseEntity.ok("<p>" + safe + "</p>");
}
